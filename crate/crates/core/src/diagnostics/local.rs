//! Local energies: balls and cosine-weighted bumps around fixed centers.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::stencil::pairwise_sum;

fn check_radius(grid: Grid, r: f64) -> Result<()> {
    if !(r > 0.0) || r >= 0.5 * grid.length() {
        return Err(invalid(format!(
            "ball radius {r} must lie in (0, {})",
            0.5 * grid.length()
        )));
    }
    Ok(())
}

/// Nodes within periodic distance `r` of a fixed center.
#[derive(Clone, Debug)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
    members: Vec<usize>,
}

impl Ball {
    pub fn new(grid: Grid, center: usize, radius: f64) -> Result<Self> {
        check_radius(grid, radius)?;
        let (ci, cj) = grid.coords(center);
        let members = grid
            .disk_offsets(radius)
            .into_iter()
            .map(|(di, dj)| grid.index(ci as isize + di, cj as isize + dj))
            .collect();
        Ok(Self {
            center,
            radius,
            members,
        })
    }

    /// `½ h² Σ_{B} |df|²`.
    pub fn energy(&self, grid: Grid, density: &[f64]) -> f64 {
        let vals: Vec<f64> = self.members.iter().map(|&k| density[k]).collect();
        0.5 * grid.h() * grid.h() * pairwise_sum(&vals)
    }

    /// `h² Σ_{B} value`.
    pub fn integral(&self, grid: Grid, values: &[f64]) -> f64 {
        let vals: Vec<f64> = self.members.iter().map(|&k| values[k]).collect();
        grid.h() * grid.h() * pairwise_sum(&vals)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Ball energy `½ h² Σ_{B_r(x)} |df|²` centered at every node, via periodic row
/// prefix sums.
pub fn ball_energy_field(grid: Grid, density: &[f64], r: f64) -> Result<Vec<f64>> {
    check_radius(grid, r)?;
    let n = grid.n();
    let h = grid.h();
    let reach = (r / h).floor() as usize;
    // half-width of the disk's row at vertical offset di
    let widths: Vec<usize> = (0..=reach)
        .map(|di| {
            let mut w = 0;
            while w < reach && h * (((di * di) + (w + 1) * (w + 1)) as f64).sqrt() <= r {
                w += 1;
            }
            w
        })
        .collect();
    let mut prefix = vec![0.0; n * (3 * n + 1)];
    for i in 0..n {
        let row = &mut prefix[i * (3 * n + 1)..(i + 1) * (3 * n + 1)];
        for k in 0..3 * n {
            row[k + 1] = row[k] + density[i * n + k % n];
        }
    }
    let mut out = vec![0.0; grid.len()];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for (di, &w) in widths.iter().enumerate() {
                let rows: &[isize] = if di == 0 {
                    &[0]
                } else {
                    &[-(di as isize), di as isize]
                };
                for &s in rows {
                    let ii = grid.wrap(i as isize + s);
                    let row = &prefix[ii * (3 * n + 1)..(ii + 1) * (3 * n + 1)];
                    acc += row[j + n + w + 1] - row[j + n - w];
                }
            }
            out[i * n + j] = 0.5 * h * h * acc;
        }
    }
    Ok(out)
}

/// Cosine bump `φ(d) = cos²(πd / 2r)` on `d ≤ r`, used to localize the energy.
#[derive(Clone, Debug)]
pub struct ThetaTracker {
    pub center: usize,
    pub r: f64,
    members: Vec<usize>,
    /// `φ²` at each member.
    weights: Vec<f64>,
}

impl ThetaTracker {
    pub fn new(grid: Grid, center: usize, r: f64) -> Result<Self> {
        if !(r > 2.0 * grid.h()) {
            return Err(invalid(format!(
                "theta radius {r} must exceed 2h = {}",
                2.0 * grid.h()
            )));
        }
        check_radius(grid, r)?;
        let (ci, cj) = grid.coords(center);
        let h = grid.h();
        let (members, weights) = grid
            .disk_offsets(r)
            .into_iter()
            .map(|(di, dj)| {
                let d = h * ((di * di + dj * dj) as f64).sqrt();
                let phi = (0.5 * PI * d / r).cos().powi(2);
                (grid.index(ci as isize + di, cj as isize + dj), phi * phi)
            })
            .unzip();
        Ok(Self {
            center,
            r,
            members,
            weights,
        })
    }

    pub fn weight_sum(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// `Θ_r = ½ h² Σ φ² |df|²`.
    pub fn theta(&self, grid: Grid, density: &[f64]) -> f64 {
        let vals: Vec<f64> = self
            .members
            .iter()
            .zip(&self.weights)
            .map(|(&k, w)| w * density[k])
            .collect();
        0.5 * grid.h() * grid.h() * pairwise_sum(&vals)
    }
}
