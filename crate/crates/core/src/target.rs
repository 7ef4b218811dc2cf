//! Target geometry: the embedded manifold `N ⊂ R^L` and its second fundamental form.

use crate::error::{invalid, Result};
use crate::field::{project_to_sphere, MapField, VectorField};
use crate::stencil::{gradient, integrate, laplacian, GradientField};

/// An embedded target manifold.
pub trait Target {
    fn ambient_dim(&self) -> usize;

    /// Bound on `‖A‖∞, ‖DA‖∞, ‖D²A‖∞` for the embedding.
    fn c_n(&self) -> f64;

    /// Closest-point retraction of raw ambient vectors onto the target.
    fn project(&self, raw: VectorField) -> Result<MapField>;

    /// `A(f)(df, df)` given the per-node energy density `|df|²`.
    fn second_fundamental_form_from_density(&self, f: &MapField, density: &[f64]) -> VectorField;

    fn second_fundamental_form(&self, f: &MapField, grad: &GradientField) -> VectorField {
        self.second_fundamental_form_from_density(f, &grad.density())
    }

    /// `τ(f) = Δf + A(f)(df, df)`.
    fn tension(&self, f: &MapField) -> VectorField {
        let density = gradient(f).density();
        self.tension_from_density(f, &density)
    }

    fn tension_from_density(&self, f: &MapField, density: &[f64]) -> VectorField {
        let mut tau = laplacian(f);
        let a = self.second_fundamental_form_from_density(f, density);
        for (t, x) in tau.as_mut_slice().iter_mut().zip(a.as_slice()) {
            *t += x;
        }
        tau
    }

    /// `‖τ(f)‖²_{L²(M)}`.
    fn tension_l2(&self, f: &MapField) -> f64 {
        let tau = self.tension(f);
        integrate(f.grid(), &tau.norm_sq())
    }
}

/// The unit sphere `S^{L−1} ⊂ R^L`, for which `A(f)(X, Y) = −⟨X, Y⟩ f`.
///
/// With the sign convention used here the harmonic map equation reads
/// `Δf + |df|² f = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SphereTarget {
    ambient_dim: usize,
}

impl SphereTarget {
    pub fn new(ambient_dim: usize) -> Result<Self> {
        if !(3..=crate::field::MAX_AMBIENT_DIM).contains(&ambient_dim) {
            return Err(invalid(format!(
                "sphere target needs ambient dimension in 3..={}, got {ambient_dim}",
                crate::field::MAX_AMBIENT_DIM
            )));
        }
        Ok(Self { ambient_dim })
    }
}

impl Default for SphereTarget {
    fn default() -> Self {
        Self { ambient_dim: 3 }
    }
}

impl Target for SphereTarget {
    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    fn c_n(&self) -> f64 {
        1.0
    }

    fn project(&self, raw: VectorField) -> Result<MapField> {
        project_to_sphere(raw)
    }

    fn second_fundamental_form_from_density(&self, f: &MapField, density: &[f64]) -> VectorField {
        let values = f.values();
        VectorField::from_fn(f.grid(), f.dim(), |idx, out| {
            let d = density[idx];
            for (o, x) in out.iter_mut().zip(values.node(idx)) {
                *o = d * x;
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::stencil::dot;
    use std::f64::consts::PI;

    fn circle(n: usize) -> MapField {
        let g = Grid::new(n, 2.0 * PI).unwrap();
        project_to_sphere(VectorField::from_fn(g, 3, |idx, out| {
            let (x, _) = g.position(idx);
            out.copy_from_slice(&[x.cos(), x.sin(), 0.0]);
        }))
        .unwrap()
    }

    fn constant(n: usize) -> MapField {
        let g = Grid::new(n, 2.0 * PI).unwrap();
        project_to_sphere(VectorField::from_fn(g, 3, |_, o| {
            o.copy_from_slice(&[0.0, 0.0, 1.0])
        }))
        .unwrap()
    }

    #[test]
    fn constant_map_has_zero_tension() {
        let s = SphereTarget::default();
        let f = constant(16);
        assert!(s.tension(&f).as_slice().iter().all(|x| *x == 0.0));
        assert!(s
            .second_fundamental_form(&f, &gradient(&f))
            .as_slice()
            .iter()
            .all(|x| *x == 0.0));
        assert_eq!(s.tension_l2(&f), 0.0);
    }

    #[test]
    fn circle_second_fundamental_form_is_the_map() {
        let s = SphereTarget::default();
        let f = circle(64);
        let a = s.second_fundamental_form(&f, &gradient(&f));
        let h = f.grid().h();
        assert!(a.max_distance(f.values()) <= h * h);
    }

    #[test]
    fn second_fundamental_form_is_parallel_to_f() {
        let s = SphereTarget::default();
        let g = Grid::new(16, 1.0).unwrap();
        let f = project_to_sphere(VectorField::from_fn(g, 3, |idx, o| {
            let (x, y) = g.position(idx);
            o.copy_from_slice(&[(7.0 * x).sin(), (3.0 * y).cos(), 1.0 + x * y]);
        }))
        .unwrap();
        let a = s.second_fundamental_form(&f, &gradient(&f));
        for idx in 0..g.len() {
            let (u, w) = (a.node(idx), f.node(idx));
            let cross = [
                u[1] * w[2] - u[2] * w[1],
                u[2] * w[0] - u[0] * w[2],
                u[0] * w[1] - u[1] * w[0],
            ];
            assert!(cross
                .iter()
                .all(|c| c.abs() <= 1e-12 * (1.0 + u.iter().map(|q| q.abs()).sum::<f64>())));
        }
    }

    #[test]
    fn circle_tension_vanishes_at_second_order() {
        let s = SphereTarget::default();
        let errs: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| s.tension(&circle(n)).max_norm())
            .collect();
        for w in errs.windows(2) {
            assert!(w[0] / w[1] >= 3.8, "{errs:?}");
        }
        let h = 2.0 * PI / 64.0;
        assert!(errs[1] <= h * h);
        // square of an O(h²) field
        let l2: Vec<f64> = [32, 64].iter().map(|&n| s.tension_l2(&circle(n))).collect();
        assert!(l2[0] / l2[1] >= 14.0, "{l2:?}");
    }

    #[test]
    fn tension_is_tangent_at_second_order() {
        let s = SphereTarget::default();
        let defect = |n: usize| {
            let g = Grid::new(n, 2.0 * PI).unwrap();
            let f = project_to_sphere(VectorField::from_fn(g, 3, |idx, o| {
                let (x, y) = g.position(idx);
                o.copy_from_slice(&[
                    0.4 * x.sin() + 0.2 * (2.0 * y).cos(),
                    0.3 * (x + y).cos(),
                    1.0,
                ]);
            }))
            .unwrap();
            dot(&s.tension(&f), f.values())
                .iter()
                .map(|d| d.abs())
                .fold(0.0, f64::max)
        };
        let (d32, d64) = (defect(32), defect(64));
        assert!(d32 / d64 >= 3.5, "{d32} {d64}");
    }

    #[test]
    fn small_perturbation_tension_linearizes_to_laplacian() {
        // f = N + εψ projected; τ(f) ≈ ε Δψ for tangential ψ.
        let s = SphereTarget::default();
        let g = Grid::new(32, 2.0 * PI).unwrap();
        let psi = VectorField::from_fn(g, 3, |idx, o| {
            let (x, y) = g.position(idx);
            o.copy_from_slice(&[x.sin() * y.cos(), (2.0 * x).cos(), 0.0]);
        });
        let lap = laplacian(&psi);
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let f = project_to_sphere(VectorField::from_fn(g, 3, |idx, o| {
                let p = psi.node(idx);
                o.copy_from_slice(&[eps * p[0], eps * p[1], 1.0]);
            }))
            .unwrap();
            let tau = s.tension(&f);
            let mut rel = 0.0f64;
            for idx in 0..g.len() {
                for k in 0..2 {
                    rel = rel.max((tau.node(idx)[k] / eps - lap.node(idx)[k]).abs());
                }
            }
            let rel = rel / lap.max_norm();
            assert!(rel <= 10.0 * eps, "eps {eps}: {rel}");
            assert!(rel < prev);
            prev = rel;
        }
    }

    #[test]
    fn energy_gap_witness() {
        // the circle map is a nontrivial harmonic map; default ε₀ sits far below its energy
        let e = crate::stencil::energy(&circle(64));
        assert!(e >= 0.5);
        assert!((e - 2.0 * PI * PI).abs() < 0.1);
    }

    #[test]
    fn rejects_low_dimensional_sphere() {
        assert!(SphereTarget::new(2).is_err());
        assert_eq!(SphereTarget::new(4).unwrap().ambient_dim(), 4);
    }
}
