//! Periodic square grids on the flat torus.
//!
//! Node `(i, j)` sits at `x = i·h`, `y = j·h` and is stored at flat index `i·n + j`.
//! All index arithmetic wraps modulo `n`; there are no boundary nodes.

use crate::error::{invalid, Result};

pub const MIN_NODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    length: f64,
}

/// Builds a periodic `n × n` grid of side `length`.
pub fn make_grid(n: usize, length: f64) -> Result<Grid> {
    Grid::new(n, length)
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < MIN_NODES {
            return Err(invalid(format!(
                "grid needs at least {MIN_NODES} nodes per axis, got {n}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(invalid(format!(
                "grid length must be positive and finite, got {length}"
            )));
        }
        Ok(Self { n, length })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Area of the torus.
    pub fn area(&self) -> f64 {
        self.length * self.length
    }

    #[inline]
    pub fn wrap(&self, k: isize) -> usize {
        k.rem_euclid(self.n as isize) as usize
    }

    /// Flat index of node `(i, j)` with both coordinates taken modulo `n`.
    #[inline]
    pub fn index(&self, i: isize, j: isize) -> usize {
        self.wrap(i) * self.n + self.wrap(j)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.n, idx % self.n)
    }

    #[inline]
    pub fn position(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.coords(idx);
        let h = self.h();
        (i as f64 * h, j as f64 * h)
    }

    /// Nearest node to a physical point (wrapped onto the torus).
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let h = self.h();
        let i = (x / h).round() as isize;
        let j = (y / h).round() as isize;
        self.index(i, j)
    }

    /// Signed displacement `p - q` reduced to the fundamental cell `[-L/2, L/2)`.
    pub fn displacement(&self, p: (f64, f64), q: (f64, f64)) -> (f64, f64) {
        let l = self.length;
        let reduce = |d: f64| d - l * (d / l + 0.5).floor();
        (reduce(p.0 - q.0), reduce(p.1 - q.1))
    }

    /// Periodic Euclidean distance between two nodes, computed from integer offsets.
    pub fn node_distance(&self, a: usize, b: usize) -> f64 {
        let (ai, aj) = self.coords(a);
        let (bi, bj) = self.coords(b);
        let di = self.cyclic_offset(ai, bi) as f64;
        let dj = self.cyclic_offset(aj, bj) as f64;
        self.h() * (di * di + dj * dj).sqrt()
    }

    /// Smallest absolute cyclic offset between two indices.
    #[inline]
    pub fn cyclic_offset(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(self.n - d)
    }

    /// Node indices within periodic distance `r` of `center`, as integer offsets.
    pub fn disk_offsets(&self, r: f64) -> Vec<(isize, isize)> {
        let h = self.h();
        let reach = (r / h).floor() as isize;
        let mut out = Vec::new();
        for di in -reach..=reach {
            for dj in -reach..=reach {
                let d = h * ((di * di + dj * dj) as f64).sqrt();
                if d <= r {
                    out.push((di, dj));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spacing_is_length_over_n() {
        let g = make_grid(64, 2.0 * PI).unwrap();
        assert_eq!(g.h(), 2.0 * PI / 64.0);
        assert!((g.h() - 0.09817).abs() < 1e-5);
        let g = make_grid(8, 1.0).unwrap();
        assert_eq!(g.h(), 0.125);
    }

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(matches!(
            make_grid(4, 1.0),
            Err(crate::Error::InvalidArgument(_))
        ));
        assert!(make_grid(8, 0.0).is_err());
        assert!(make_grid(8, -1.0).is_err());
        assert!(make_grid(8, f64::NAN).is_err());
    }

    #[test]
    fn index_wraps_in_both_axes() {
        let g = make_grid(16, 1.0).unwrap();
        for i in 0..16isize {
            for j in 0..16isize {
                assert_eq!(g.index(i + 16, j), g.index(i, j));
                assert_eq!(g.index(i, j - 16), g.index(i, j));
                assert_eq!(g.index(i - 32, j + 48), g.index(i, j));
            }
        }
    }

    #[test]
    fn displacement_lands_in_fundamental_cell() {
        let g = make_grid(16, 2.0).unwrap();
        let (dx, dy) = g.displacement((1.9, 0.1), (0.1, 1.9));
        assert!((dx + 0.2).abs() < 1e-12);
        assert!((dy - 0.2).abs() < 1e-12);
    }

    #[test]
    fn node_distance_is_periodic() {
        let g = make_grid(10, 10.0).unwrap();
        assert_eq!(g.node_distance(g.index(0, 0), g.index(9, 0)), 1.0);
        assert_eq!(g.node_distance(g.index(1, 1), g.index(9, 9)), 8.0f64.sqrt());
    }
}
