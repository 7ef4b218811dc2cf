use std::f64::consts::PI;

use chflow::stencil::{
    energy, energy_fd, forward_gradient, gradient, integrate, laplacian, pairwise_sum,
};
use chflow::{project_to_sphere, Grid, VectorField};
use proptest::prelude::*;

fn field(n: usize, dim: usize, seed: &[f64]) -> VectorField {
    let g = Grid::new(n, 2.0 * PI).unwrap();
    VectorField::from_fn(g, dim, |idx, o| {
        let (x, y) = g.position(idx);
        for (k, v) in o.iter_mut().enumerate() {
            let c = seed[k % seed.len()];
            *v = (c * x + k as f64).sin() * (y - c).cos() + c * (2.0 * y).sin();
        }
    })
}

fn inner(a: &VectorField, b: &VectorField) -> f64 {
    let prods: Vec<f64> = a
        .nodes()
        .zip(b.nodes())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    integrate(a.grid(), &prods)
}

/// Signed permutation matrices of R³ (a sample of the octahedral group).
fn signed_permutations() -> Vec<[f64; 9]> {
    vec![
        [0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0],
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn summation_by_parts(a in -3.0f64..3.0, b in -3.0f64..3.0, n in 8usize..40) {
        let f = field(n, 3, &[a, b]);
        let g = field(n, 3, &[b, a + 1.0]);
        let lhs = inner(&laplacian(&f), &g);
        let (df, dg) = (forward_gradient(&f), forward_gradient(&g));
        let rhs = -(inner(&df.dx, &dg.dx) + inner(&df.dy, &dg.dy));
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{} {}", lhs, rhs);
    }

    #[test]
    fn forward_energy_variation_is_minus_laplacian(a in -2.0f64..2.0, eps_exp in 3i32..6) {
        let f = field(24, 3, &[a, 0.5]);
        let g = field(24, 3, &[1.0, a]);
        let eps = 10f64.powi(-eps_exp);
        let shifted = VectorField::from_vec(
            f.grid(),
            3,
            f.as_slice().iter().zip(g.as_slice()).map(|(x, y)| x + eps * y).collect(),
        )
        .unwrap();
        let quotient = (energy_fd(&shifted) - energy_fd(&f)) / eps;
        let predicted = -inner(&laplacian(&f), &g);
        // E_fd is quadratic, so the quotient is exact up to its O(eps) term
        let second = energy_fd(&g);
        prop_assert!((quotient - predicted - eps * second).abs() <= 1e-6 * (1.0 + predicted.abs()));
    }

    #[test]
    fn laplacian_commutes_with_grid_shifts(a in -3.0f64..3.0, di in -20isize..20, dj in -20isize..20) {
        let f = field(32, 4, &[a, 1.5]);
        prop_assert_eq!(laplacian(&f.shifted(di, dj)), laplacian(&f).shifted(di, dj));
        prop_assert_eq!(gradient(&f.shifted(di, dj)).density(), {
            let d = gradient(&f).density();
            let g = f.grid();
            let s = VectorField::from_vec(g, 1, d).unwrap().shifted(di, dj);
            s.as_slice().to_vec()
        });
    }

    #[test]
    fn stencils_commute_with_signed_permutations(a in -3.0f64..3.0, which in 0usize..4) {
        let rot = signed_permutations()[which];
        let f = project_to_sphere(field(16, 3, &[a, 0.25])).unwrap();
        let rotated = f.rotated(&rot).unwrap();
        prop_assert_eq!(laplacian(&rotated), laplacian(&f).rotated(&rot));
        prop_assert_eq!(gradient(&rotated).density(), gradient(&f).density());
        prop_assert_eq!(energy(&rotated), energy(&f));
    }

    #[test]
    fn pairwise_sum_close_to_exact(values in prop::collection::vec(-1e3f64..1e3, 0..500)) {
        let naive: f64 = values.iter().sum();
        let scale: f64 = values.iter().map(|x| x.abs()).sum();
        prop_assert!((pairwise_sum(&values) - naive).abs() <= 1e-12 * (1.0 + scale));
    }
}

#[test]
fn laplacian_of_constant_is_exact_zero() {
    let g = Grid::new(16, 3.0).unwrap();
    let f = VectorField::from_fn(g, 3, |_, o| o.copy_from_slice(&[0.1, -0.7, 1.0 / 3.0]));
    assert!(laplacian(&f).as_slice().iter().all(|x| *x == 0.0));
}
