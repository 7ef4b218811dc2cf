//! Grid quantities against independent one-dimensional quadratures.

use std::f64::consts::PI;

use chflow::diagnostics::ThetaTracker;
use chflow::scenario::{BUBBLE_CORE, BUBBLE_CUTOFF};
use chflow::stencil::{energy, gradient};
use chflow::{generate, Grid, Scenario, ScenarioKind};

/// Polar angle of the blended bubble at distance `r` from its center.
fn bubble_angle(r: f64, lambda: f64) -> f64 {
    let (core, cut) = (BUBBLE_CORE * lambda, BUBBLE_CUTOFF * lambda);
    let w = if r <= core {
        1.0
    } else if r >= cut {
        0.0
    } else {
        (0.5 * PI * (r - core) / (cut - core)).cos().powi(2)
    };
    let rho = r / lambda;
    let den = 1.0 + rho * rho;
    let radial = w * 2.0 * rho / den;
    let vertical = w * (rho * rho - 1.0) / den + 1.0 - w;
    radial.atan2(vertical)
}

/// `|df|²` of the rotationally symmetric map `(sin ψ cos θ, sin ψ sin θ, cos ψ)`.
fn bubble_density(r: f64, lambda: f64) -> f64 {
    let d = 1e-6 * lambda;
    let dpsi = (bubble_angle(r + d, lambda) - bubble_angle(r - d, lambda)) / (2.0 * d);
    dpsi * dpsi + bubble_angle(r, lambda).sin().powi(2) / (r * r)
}

/// Composite Simpson rule.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for k in 1..panels {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `½ ∫ weight(r)·|df|² 2πr dr`.
fn radial_energy(lambda: f64, reach: f64, weight: impl Fn(f64) -> f64) -> f64 {
    let core = BUBBLE_CORE * lambda;
    let integrand = |r: f64| {
        if r == 0.0 {
            0.0
        } else {
            weight(r) * bubble_density(r, lambda) * PI * r
        }
    };
    // the ramp has a kink at the core radius, so split there
    let split = core.min(reach);
    simpson(integrand, 0.0, split, 200_000)
        + if reach > core {
            simpson(integrand, core, reach, 200_000)
        } else {
            0.0
        }
}

#[test]
fn radial_oracle_reproduces_the_unit_sphere_area() {
    // an uncut bubble has energy 4π; check the oracle machinery on it
    let lambda = 1.0;
    let dens = |r: f64| 8.0 / (lambda * lambda * (1.0 + (r / lambda).powi(2)).powi(2));
    let e = simpson(|r| 0.5 * dens(r) * 2.0 * PI * r, 0.0, 2000.0, 2_000_000);
    assert!((e - 4.0 * PI).abs() < 1e-4 * 4.0 * PI, "{e}");
    assert!((bubble_density(0.3, 1e9) - dens(0.3) * 0.0).abs() < 1.0);
}

#[test]
fn blended_bubble_energy_near_one_sphere() {
    let lambda = 0.1;
    let exact = radial_energy(lambda, BUBBLE_CUTOFF * lambda, |_| 1.0);
    // the cutoff ramp adds energy rather than removing it
    let defect = exact / (4.0 * PI) - 1.0;
    assert!(defect.abs() <= 0.05, "defect {defect}");

    let g = Grid::new(512, 2.0 * PI).unwrap();
    let mut s = Scenario::new(ScenarioKind::Bubble);
    s.scale = lambda;
    let grid_energy = energy(&generate(&s, g, 3).unwrap());
    assert!(
        (grid_energy - exact).abs() <= 0.01 * exact,
        "grid {grid_energy} oracle {exact}"
    );
}

#[test]
fn bubble_energy_converges_under_refinement() {
    let lambda = 0.25;
    let exact = radial_energy(lambda, BUBBLE_CUTOFF * lambda, |_| 1.0);
    let err = |n: usize| {
        let g = Grid::new(n, 2.0 * PI).unwrap();
        let mut s = Scenario::new(ScenarioKind::Bubble);
        s.scale = lambda;
        (energy(&generate(&s, g, 3).unwrap()) - exact).abs()
    };
    let (e1, e2) = (err(128), err(256));
    assert!(e1 / e2 >= 3.0, "{e1} {e2}");
}

#[test]
fn theta_matches_weighted_radial_energy() {
    let lambda = 0.1;
    let g = Grid::new(512, 2.0 * PI).unwrap();
    let mut s = Scenario::new(ScenarioKind::Bubble);
    s.scale = lambda;
    s.center = Some((PI, PI));
    let f = generate(&s, g, 3).unwrap();
    let density = gradient(&f).density();
    let total = radial_energy(lambda, BUBBLE_CUTOFF * lambda, |_| 1.0);
    for k in [4.0, 8.0] {
        let r = k * lambda;
        let tracker = ThetaTracker::new(g, g.nearest_node(PI, PI), r).unwrap();
        let theta = tracker.theta(g, &density);
        let oracle = radial_energy(lambda, r, |d| (0.5 * PI * d / r).cos().powi(4));
        assert!(
            (theta - oracle).abs() <= 0.02 * oracle,
            "r {r}: grid {theta} oracle {oracle}"
        );
        // the cosine-squared bump keeps well under the full energy at these radii
        assert!(oracle / total < 0.9, "r {r}: fraction {}", oracle / total);
    }
}

#[test]
fn theta_of_circle_is_half_the_bump_integral() {
    let g = Grid::new(64, 2.0 * PI).unwrap();
    let f = generate(&Scenario::new(ScenarioKind::Circle), g, 3).unwrap();
    let density = gradient(&f).density();
    let r = 1.0;
    let tracker = ThetaTracker::new(g, 100, r).unwrap();
    // ½∫ cos⁴(πd/2r) over the disk = ½·2π·r²·(3/16 − 3/(4π²))... evaluated numerically
    let bump = simpson(
        |d| (0.5 * PI * d / r).cos().powi(4) * 2.0 * PI * d,
        0.0,
        r,
        100_000,
    );
    let h = g.h();
    let discrete = 0.5 * h * h * tracker.weight_sum();
    assert!((tracker.theta(g, &density) - density[100] * discrete).abs() < 1e-9);
    assert!(
        (discrete - 0.5 * bump).abs() <= 0.02 * bump,
        "{discrete} {}",
        0.5 * bump
    );
}
