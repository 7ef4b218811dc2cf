//! Deterministic initial maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::field::{MapField, VectorField};
use crate::grid::Grid;
use crate::target::{SphereTarget, Target};

/// Highest Fourier mode (per axis) in a random perturbation.
pub const PERTURBATION_MAX_MODE: i32 = 3;

/// A bubble profile is undistorted inside `BUBBLE_CORE·λ` and fully blended
/// to the north pole at `BUBBLE_CUTOFF·λ`.
pub const BUBBLE_CORE: f64 = 2.0;
pub const BUBBLE_CUTOFF: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Constant,
    Circle,
    Bubble,
    Perturbed,
    Traveling,
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "constant" => Self::Constant,
            "circle" => Self::Circle,
            "bubble" => Self::Bubble,
            "perturbed" => Self::Perturbed,
            "traveling" => Self::Traveling,
            other => return Err(format!("unknown scenario kind `{other}`")),
        })
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Circle => "circle",
            Self::Bubble => "bubble",
            Self::Perturbed => "perturbed",
            Self::Traveling => "traveling",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Perturbed: RMS size of the displacement. Traveling: radius of the path
    /// the bubble center follows.
    pub amplitude: f64,
    /// Bubble concentration scale λ.
    pub scale: f64,
    /// `None` means the middle of the domain.
    pub center: Option<(f64, f64)>,
    pub seed: u64,
    /// Traveling: position along the path, in turns.
    pub phase: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Constant,
            amplitude: 0.2,
            scale: 0.25,
            center: None,
            seed: 1,
            phase: 0.0,
        }
    }
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn center_on(&self, grid: Grid) -> (f64, f64) {
        self.center
            .unwrap_or((0.5 * grid.length(), 0.5 * grid.length()))
    }

    /// Where the bubble sits: the fixed center, or the point on the traveling path.
    pub fn bubble_center(&self, grid: Grid) -> (f64, f64) {
        let (cx, cy) = self.center_on(grid);
        match self.kind {
            ScenarioKind::Traveling => {
                let theta = 2.0 * PI * self.phase;
                (
                    cx + self.amplitude * theta.cos(),
                    cy + self.amplitude * theta.sin(),
                )
            }
            _ => (cx, cy),
        }
    }
}

fn north_pole(dim: usize) -> Vec<f64> {
    let mut p = vec![0.0; dim];
    p[dim - 1] = 1.0;
    p
}

/// Samples the scenario's initial map on `grid` in `R^dim`.
pub fn generate(s: &Scenario, grid: Grid, dim: usize) -> Result<MapField> {
    let target = SphereTarget::new(dim)?;
    let raw = match s.kind {
        ScenarioKind::Constant => {
            let np = north_pole(dim);
            VectorField::from_fn(grid, dim, |_, o| o.copy_from_slice(&np))
        }
        ScenarioKind::Circle => {
            let k = 2.0 * PI / grid.length();
            VectorField::from_fn(grid, dim, |idx, o| {
                let (x, _) = grid.position(idx);
                o.fill(0.0);
                o[0] = (k * x).cos();
                o[1] = (k * x).sin();
            })
        }
        ScenarioKind::Bubble | ScenarioKind::Traveling => {
            bubble(grid, dim, s.scale, s.bubble_center(grid))?
        }
        ScenarioKind::Perturbed => perturbed(grid, dim, s.amplitude, s.seed)?,
    };
    target.project(raw)
}

/// Inverse stereographic bubble of scale `lambda`, south pole at `center`,
/// blended to the north pole by a cosine ramp on `[2λ, 8λ]`.
fn bubble(grid: Grid, dim: usize, lambda: f64, center: (f64, f64)) -> Result<VectorField> {
    let h = grid.h();
    if !(lambda > 4.0 * h) {
        return Err(invalid(format!(
            "bubble scale {lambda} is not resolvable: needs > 4h = {}",
            4.0 * h
        )));
    }
    if BUBBLE_CUTOFF * lambda > 0.5 * grid.length() {
        return Err(invalid(format!(
            "bubble scale {lambda} too large: cutoff radius {} exceeds half the domain",
            BUBBLE_CUTOFF * lambda
        )));
    }
    let r_core = BUBBLE_CORE * lambda;
    let r_cut = BUBBLE_CUTOFF * lambda;
    Ok(VectorField::from_fn(grid, dim, |idx, o| {
        let (dx, dy) = grid.displacement(grid.position(idx), center);
        let d = (dx * dx + dy * dy).sqrt();
        let (z1, z2) = (dx / lambda, dy / lambda);
        let zz = z1 * z1 + z2 * z2;
        let weight = if d <= r_core {
            1.0
        } else if d >= r_cut {
            0.0
        } else {
            (0.5 * PI * (d - r_core) / (r_cut - r_core)).cos().powi(2)
        };
        o.fill(0.0);
        let den = 1.0 + zz;
        o[0] = weight * 2.0 * z1 / den;
        o[1] = weight * 2.0 * z2 / den;
        o[dim - 1] = weight * (zz - 1.0) / den + (1.0 - weight);
    }))
}

/// North pole displaced by a seeded trigonometric polynomial (modes ≤ 3) with
/// unit RMS over the torus, scaled by `amplitude`.
fn perturbed(grid: Grid, dim: usize, amplitude: f64, seed: u64) -> Result<VectorField> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(invalid(format!(
            "perturbation amplitude must lie in [0, 1), got {amplitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for kx in 0..=PERTURBATION_MAX_MODE {
        for ky in -PERTURBATION_MAX_MODE..=PERTURBATION_MAX_MODE {
            if kx == 0 && ky <= 0 {
                continue;
            }
            let coeffs: Vec<(f64, f64)> = (0..dim)
                .map(|_| (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
                .collect();
            modes.push((kx as f64, ky as f64, coeffs));
        }
    }
    let mean_sq: f64 = modes
        .iter()
        .flat_map(|m| m.2.iter())
        .map(|(c, s)| 0.5 * (c * c + s * s))
        .sum();
    let scale = amplitude / mean_sq.sqrt();
    let k0 = 2.0 * PI / grid.length();
    let np = north_pole(dim);
    Ok(VectorField::from_fn(grid, dim, |idx, o| {
        let (x, y) = grid.position(idx);
        o.copy_from_slice(&np);
        for (kx, ky, coeffs) in &modes {
            let theta = k0 * (kx * x + ky * y);
            let (sn, cs) = theta.sin_cos();
            for (ok, (c, s)) in o.iter_mut().zip(coeffs) {
                *ok += scale * (c * cs + s * sn);
            }
        }
    }))
}
