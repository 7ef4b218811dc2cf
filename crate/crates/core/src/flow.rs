//! Time integration of the coupled map / conformal-factor system
//!
//! ```text
//! f_t = v⁻¹ (Δf + A(f)(df, df))
//! v_t = 2b |df|² − 2a v          (v = e^{2u})
//! ```
//!
//! Each step updates `f` first (explicit Euler or linearly implicit), then
//! advances `v` exactly with `|df|²` frozen at the start of the step.

use crate::error::{Error, Result};
use crate::field::{ConformalField, MapField, VectorField};
use crate::grid::Grid;
use crate::params::{FlowParams, Scheme};
use crate::stencil::{gradient, pairwise_sum, Neighbors};
use crate::target::Target;

/// Retries (each halving `dt`) before a failing step aborts the run.
pub const MAX_STEP_HALVINGS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub f: MapField,
    pub v: ConformalField,
    /// Most recent `f_t`, kept for diagnostics.
    pub last_ft: VectorField,
    pub step_count: u64,
}

impl FlowState {
    /// Starts the flow at `t = 0` with `v ≡ 1`.
    pub fn new(f: MapField, target: &impl Target) -> Self {
        let v = ConformalField::ones(f.grid());
        let last_ft = explicit_velocity(&f, &v, target).ft;
        Self {
            t: 0.0,
            f,
            v,
            last_ft,
            step_count: 0,
        }
    }

    pub fn grid(&self) -> Grid {
        self.f.grid()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub dt_used: f64,
    /// Largest node displacement of `f` over the step.
    pub max_update: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Whether at least one attempt at a larger `dt` was rejected.
    pub rejected: bool,
}

/// Exact solution of `v_t = 2b·density − 2a·v` over `dt` with the density frozen.
///
/// For `a = 0` this is the limit `v + 2b·density·dt`.
pub fn step_v_exact(
    v: &ConformalField,
    density: &[f64],
    a: f64,
    b: f64,
    dt: f64,
) -> ConformalField {
    let values = if a > 0.0 {
        let decay = (-2.0 * a * dt).exp();
        let gain = -(-2.0 * a * dt).exp_m1() * b / a;
        v.values()
            .iter()
            .zip(density)
            .map(|(v, d)| decay * v + gain * d)
            .collect()
    } else {
        v.values()
            .iter()
            .zip(density)
            .map(|(v, d)| v + 2.0 * b * d * dt)
            .collect()
    };
    ConformalField::from_vec_unchecked(v.grid(), values)
}

/// Explicit-diffusion limit `cfl · h² · min(v) / 4`.
pub fn stable_dt(state: &FlowState, cfl: f64) -> f64 {
    let h = state.grid().h();
    cfl * h * h * state.v.min() / 4.0
}

pub(crate) struct Velocity {
    pub ft: VectorField,
    pub density: Vec<f64>,
}

/// `f_t = v⁻¹ τ(f)` together with the energy density used to build it.
pub(crate) fn explicit_velocity(
    f: &MapField,
    v: &ConformalField,
    target: &impl Target,
) -> Velocity {
    let density = gradient(f).density();
    let mut ft = target.tension_from_density(f, &density);
    let l = f.dim();
    for (node, vi) in ft.as_mut_slice().chunks_exact_mut(l).zip(v.values()) {
        for x in node {
            *x /= vi;
        }
    }
    Velocity { ft, density }
}

/// A computed but not yet committed map update.
pub(crate) struct Proposal {
    pub f_new: MapField,
    pub ft: VectorField,
    pub density: Vec<f64>,
    pub dt: f64,
}

fn explicit_proposal(
    f: &MapField,
    v: &ConformalField,
    target: &impl Target,
    dt: f64,
) -> Result<Proposal> {
    let Velocity { ft, density } = explicit_velocity(f, v, target);
    let mut raw = f.values().clone();
    for (x, d) in raw.as_mut_slice().iter_mut().zip(ft.as_slice()) {
        *x += dt * d;
    }
    let f_new = target.project(raw)?;
    Ok(Proposal {
        f_new,
        ft,
        density,
        dt,
    })
}

/// One explicit Euler map update: `f ← P(f + dt·v⁻¹τ(f))`.
///
/// Returns the projected map and the pre-projection velocity `v⁻¹τ(f)`.
pub fn step_f_explicit(
    state: &FlowState,
    target: &impl Target,
    dt: f64,
) -> Result<(MapField, VectorField)> {
    let p = explicit_proposal(&state.f, &state.v, target, dt)?;
    Ok((p.f_new, p.ft))
}

/// Harmonic map flow step (`v ≡ 1`).
pub fn hmf_step(f: &MapField, target: &impl Target, dt: f64) -> Result<MapField> {
    let ones = ConformalField::ones(f.grid());
    Ok(explicit_proposal(f, &ones, target, dt)?.f_new)
}

/// Preconditioned conjugate gradients for `(V − dt·Δ) x = rhs` on one scalar component.
///
/// Stops once the residual 2-norm has dropped by `tol` relative to the initial
/// residual. Returns the iteration count.
fn solve_component(
    grid: Grid,
    nb: &Neighbors,
    v: &[f64],
    dt: f64,
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> std::result::Result<usize, f64> {
    let n = grid.n();
    let len = grid.len();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let apply = |x: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let (ip, im) = (nb.next[i], nb.prev[i]);
            for j in 0..n {
                let (jp, jm) = (nb.next[j], nb.prev[j]);
                let c = i * n + j;
                let xc = x[c];
                let lap = ((x[ip * n + j] - xc) + (x[im * n + j] - xc))
                    + ((x[i * n + jp] - xc) + (x[i * n + jm] - xc));
                out[c] = v[c] * xc - dt * inv_h2 * lap;
            }
        }
    };
    let dotp = |a: &[f64], b: &[f64], scratch: &mut Vec<f64>| {
        scratch.clear();
        scratch.extend(a.iter().zip(b).map(|(p, q)| p * q));
        pairwise_sum(scratch)
    };
    let diag: Vec<f64> = v.iter().map(|vi| vi + 4.0 * dt * inv_h2).collect();
    let mut scratch = Vec::with_capacity(len);
    let mut ap = vec![0.0; len];
    apply(x, &mut ap);
    let mut r: Vec<f64> = rhs.iter().zip(&ap).map(|(b, a)| b - a).collect();
    let r0 = dotp(&r, &r, &mut scratch).sqrt();
    if r0 == 0.0 {
        return Ok(0);
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dotp(&r, &z, &mut scratch);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dotp(&p, &ap, &mut scratch);
        if !(pap > 0.0) {
            return Err(f64::NAN);
        }
        let alpha = rz / pap;
        for ((xi, ri), (pi, api)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
            *xi += alpha * pi;
            *ri -= alpha * api;
        }
        let rn = dotp(&r, &r, &mut scratch).sqrt();
        if rn <= tol * r0 {
            return Ok(it);
        }
        for ((zi, ri), d) in z.iter_mut().zip(&r).zip(&diag) {
            *zi = ri / d;
        }
        let rz_new = dotp(&r, &z, &mut scratch);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let rn = dotp(&r, &r, &mut scratch).sqrt();
    Err(rn / r0)
}

fn imex_proposal(
    f: &MapField,
    v: &ConformalField,
    target: &impl Target,
    dt: f64,
    tol: f64,
    max_iter: usize,
    t: f64,
) -> Result<(Proposal, usize)> {
    let grid = f.grid();
    let l = f.dim();
    let len = grid.len();
    let density = gradient(f).density();
    let a_term = target.second_fundamental_form_from_density(f, &density);
    let nb = Neighbors::new(grid.n());
    let vv = v.values();

    // Scaled by v: (V − dt·Δ) f_new = V f + dt·A(f)(df, df), one component at a time.
    let mut solved = vec![0.0; len * l];
    let mut rhs = vec![0.0; len];
    let mut x = vec![0.0; len];
    let mut iterations = 0;
    for k in 0..l {
        for idx in 0..len {
            let fk = f.node(idx)[k];
            rhs[idx] = vv[idx] * fk + dt * a_term.node(idx)[k];
            x[idx] = fk;
        }
        match solve_component(grid, &nb, vv, dt, &rhs, &mut x, tol, max_iter) {
            Ok(it) => iterations = iterations.max(it),
            Err(rel) => {
                return Err(Error::StepFailure {
                    t,
                    reason: format!("conjugate gradients stalled at relative residual {rel:e} after {max_iter} iterations"),
                })
            }
        }
        for idx in 0..len {
            solved[idx * l + k] = x[idx];
        }
    }
    let f_new = target.project(VectorField::from_vec(grid, l, solved)?)?;
    let mut ft = f_new.values().clone();
    for (d, old) in ft.as_mut_slice().iter_mut().zip(f.values().as_slice()) {
        *d = (*d - old) / dt;
    }
    Ok((
        Proposal {
            f_new,
            ft,
            density,
            dt,
        },
        iterations,
    ))
}

/// Linearly implicit map update: diffusion implicit, second fundamental form explicit.
///
/// Solves `(I − dt·v⁻¹Δ) f_new = f + dt·v⁻¹A(f)(df,df)` and projects; the
/// returned velocity is the difference quotient `(f_new − f)/dt`.
pub fn step_f_imex(
    state: &FlowState,
    target: &impl Target,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(MapField, VectorField)> {
    let (p, _) = imex_proposal(&state.f, &state.v, target, dt, tol, max_iter, state.t)?;
    Ok((p.f_new, p.ft))
}

/// Step size the driver starts from before any clamping or halving.
pub fn nominal_dt(state: &FlowState, params: &FlowParams) -> f64 {
    match params.scheme {
        Scheme::Explicit => stable_dt(state, params.cfl),
        Scheme::Imex => params.imex.dt_cap.unwrap_or(0.1 * state.grid().h()),
    }
}

fn propose(
    state: &FlowState,
    target: &impl Target,
    params: &FlowParams,
    dt: f64,
) -> Result<Proposal> {
    match params.scheme {
        Scheme::Explicit => explicit_proposal(&state.f, &state.v, target, dt),
        Scheme::Imex => imex_proposal(
            &state.f,
            &state.v,
            target,
            dt,
            params.imex.tol,
            params.imex.max_iter,
            state.t,
        )
        .map(|(p, _)| p),
    }
}

/// Tries `dt`, halving on failure up to [`MAX_STEP_HALVINGS`] times.
fn propose_with_retries(
    state: &FlowState,
    target: &impl Target,
    params: &FlowParams,
    dt: f64,
) -> Result<(Proposal, bool)> {
    let mut dt = dt;
    let mut last_err = None;
    for attempt in 0..=MAX_STEP_HALVINGS {
        match propose(state, target, params, dt) {
            Ok(p) => return Ok((p, attempt > 0)),
            Err(e @ (Error::ProjectionFailure { .. } | Error::StepFailure { .. })) => {
                log::debug!("step at t = {} with dt = {dt:e} rejected: {e}", state.t);
                last_err = Some(e);
                dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::StepFailure {
        t: state.t,
        reason: format!(
            "no acceptable step after {MAX_STEP_HALVINGS} halvings: {}",
            last_err.map(|e| e.to_string()).unwrap_or_default()
        ),
    })
}

fn commit(
    state: &mut FlowState,
    p: Proposal,
    params: &FlowParams,
    t_new: f64,
    rejected: bool,
) -> StepReport {
    let max_update = p.f_new.values().max_distance(state.f.values());
    state.v = step_v_exact(&state.v, &p.density, params.a, params.b, p.dt);
    state.f = p.f_new;
    state.last_ft = p.ft;
    state.t = t_new;
    state.step_count += 1;
    StepReport {
        dt_used: p.dt,
        max_update,
        v_min: state.v.min(),
        v_max: state.v.max(),
        rejected,
    }
}

/// One full step (map then conformal factor) with step `dt`, halving on failure.
pub fn step(
    state: &mut FlowState,
    target: &impl Target,
    params: &FlowParams,
    dt: f64,
) -> Result<StepReport> {
    let (p, rejected) = propose_with_retries(state, target, params, dt)?;
    let t_new = state.t + p.dt;
    Ok(commit(state, p, params, t_new, rejected))
}

/// What the driver shows an observer at the start of each step.
///
/// `f`, `v` and `density` are the state at time `t`; `ft` is the map velocity
/// the step uses over `[t, t + dt]`. The final call of a run has `dt = 0`.
pub struct StepView<'a> {
    pub t: f64,
    pub dt: f64,
    pub step: u64,
    pub f: &'a MapField,
    pub v: &'a ConformalField,
    pub ft: &'a VectorField,
    pub density: &'a [f64],
    /// Whether `t` is on the sampling cadence.
    pub sample: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

pub trait FlowObserver {
    fn observe(&mut self, view: &StepView<'_>) -> Control;
}

impl<F: FnMut(&StepView<'_>) -> Control> FlowObserver for F {
    fn observe(&mut self, view: &StepView<'_>) -> Control {
        self(view)
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl FlowObserver for NoObserver {
    fn observe(&mut self, _: &StepView<'_>) -> Control {
        Control::Continue
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    /// An observer asked to stop before the step starting at the current `state.t`.
    Stopped,
}

/// Advances `state` to `t_target`, calling `observer` at the start of every step.
///
/// Steps are clamped so that sample times `k·sample_dt` and `t_target` are hit
/// exactly. On a step failure the state is left at the last accepted step.
pub fn advance(
    state: &mut FlowState,
    target: &impl Target,
    params: &FlowParams,
    t_target: f64,
    sample_dt: Option<f64>,
    observer: &mut dyn FlowObserver,
) -> Result<Outcome> {
    params.validate()?;
    if !(t_target > state.t) {
        return Err(crate::error::invalid(format!(
            "t_target {t_target} must exceed current time {}",
            state.t
        )));
    }
    if let Some(s) = sample_dt {
        if !(s > 0.0) {
            return Err(crate::error::invalid("sample_dt must be positive"));
        }
    }
    let eps = 1e-12 * t_target.max(1.0);
    let mut next_sample = sample_dt.map(|s| {
        let k = ((state.t - eps) / s).ceil().max(0.0);
        (k as u64, s)
    });

    loop {
        let mut sample = false;
        let mut sample_time = f64::INFINITY;
        if let Some((k, s)) = next_sample.as_mut() {
            if state.t >= *k as f64 * *s - eps {
                sample = true;
                *k += 1;
            }
            sample_time = *k as f64 * *s;
        }
        if state.t >= t_target - eps {
            break;
        }
        let stop_at = sample_time.min(t_target);
        let base = nominal_dt(state, params);
        let (dt, lands) = if state.t + base >= stop_at - eps {
            (stop_at - state.t, true)
        } else {
            (base, false)
        };

        let (p, rejected) = propose_with_retries(state, target, params, dt)?;
        let view = StepView {
            t: state.t,
            dt: p.dt,
            step: state.step_count,
            f: &state.f,
            v: &state.v,
            ft: &p.ft,
            density: &p.density,
            sample,
        };
        if observer.observe(&view) == Control::Stop {
            return Ok(Outcome::Stopped);
        }
        let t_new = if lands && !rejected {
            stop_at
        } else {
            state.t + p.dt
        };
        commit(state, p, params, t_new, rejected);
    }

    let vel = explicit_velocity(&state.f, &state.v, target);
    state.last_ft = vel.ft;
    let view = StepView {
        t: state.t,
        dt: 0.0,
        step: state.step_count,
        f: &state.f,
        v: &state.v,
        ft: &state.last_ft,
        density: &vel.density,
        sample: true,
    };
    if observer.observe(&view) == Control::Stop {
        return Ok(Outcome::Stopped);
    }
    Ok(Outcome::Completed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::project_to_sphere;
    use crate::target::SphereTarget;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    fn map(g: Grid, f: impl Fn(f64, f64) -> [f64; 3]) -> MapField {
        project_to_sphere(VectorField::from_fn(g, 3, |idx, o| {
            let (x, y) = g.position(idx);
            o.copy_from_slice(&f(x, y));
        }))
        .unwrap()
    }

    fn smooth(g: Grid) -> MapField {
        map(g, |x, y| {
            [
                0.3 * x.sin() + 0.1 * (2.0 * y).cos(),
                0.2 * (x + y).cos(),
                1.0,
            ]
        })
    }

    #[test]
    fn v_step_zero_density_is_exponential_decay() {
        let g = grid(8);
        let v = ConformalField::ones(g);
        let out = step_v_exact(&v, &vec![0.0; g.len()], 1.0, 4.0, 0.3);
        for x in out.values() {
            assert!((x - (-0.6f64).exp()).abs() <= 1e-16);
        }
    }

    #[test]
    fn v_step_long_time_limit_is_fixed_point() {
        let g = grid(8);
        let v = ConformalField::ones(g);
        let out = step_v_exact(&v, &vec![1.0; g.len()], 1.0, 4.0, 1e3);
        assert!(out.values().iter().all(|x| (x - 4.0).abs() < 1e-12));
    }

    #[test]
    fn v_step_without_damping_is_linear() {
        let g = grid(8);
        let v = ConformalField::ones(g);
        let out = step_v_exact(&v, &vec![1.0; g.len()], 0.0, 4.0, 0.5);
        assert!(out.values().iter().all(|x| *x == 5.0));
    }

    #[test]
    fn stable_dt_formula() {
        let g = Grid::new(10, 1.0).unwrap();
        let f = map(g, |_, _| [0.0, 0.0, 1.0]);
        let mut s = FlowState::new(f, &SphereTarget::default());
        assert!((stable_dt(&s, 0.25) - 0.000625).abs() < 1e-18);
        assert!((stable_dt(&s, 1.0) - 0.01 / 4.0).abs() < 1e-18);
        let base = stable_dt(&s, 0.25);
        let mut vals = s.v.values().to_vec();
        vals[3] = 0.01;
        s.v = ConformalField::from_vec(g, vals).unwrap();
        assert!((base / stable_dt(&s, 0.25) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn explicit_step_constant_map_is_fixed() {
        let target = SphereTarget::default();
        let f = map(grid(16), |_, _| [0.0, 0.0, 1.0]);
        let s = FlowState::new(f.clone(), &target);
        let (f_new, ft) = step_f_explicit(&s, &target, 0.01).unwrap();
        assert_eq!(f_new, f);
        assert!(ft.as_slice().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn explicit_velocity_scales_with_inverse_v() {
        let target = SphereTarget::default();
        let g = grid(16);
        let mut s = FlowState::new(smooth(g), &target);
        let (_, ft1) = step_f_explicit(&s, &target, 1e-3).unwrap();
        s.v = ConformalField::from_vec(g, vec![2.0; g.len()]).unwrap();
        let (_, ft2) = step_f_explicit(&s, &target, 1e-3).unwrap();
        for (a, b) in ft1.as_slice().iter().zip(ft2.as_slice()) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn circle_map_barely_moves() {
        let target = SphereTarget::default();
        let g = grid(64);
        let circle = map(g, |x, _| [x.cos(), x.sin(), 0.0]);
        let s = FlowState::new(circle.clone(), &target);
        let dt = stable_dt(&s, 0.25);
        let (f_new, _) = step_f_explicit(&s, &target, dt).unwrap();
        assert!(f_new.values().max_distance(circle.values()) <= g.h() * g.h() * dt);
    }

    #[test]
    fn imex_constant_map_converges_immediately() {
        let target = SphereTarget::default();
        let f = map(grid(16), |_, _| [0.0, 0.0, 1.0]);
        let s = FlowState::new(f.clone(), &target);
        let (p, its) = imex_proposal(&s.f, &s.v, &target, 0.05, 1e-10, 100, 0.0).unwrap();
        assert!(its <= 1);
        assert_eq!(p.f_new, f);
    }

    #[test]
    fn imex_agrees_with_explicit_for_small_dt() {
        let target = SphereTarget::default();
        let s = FlowState::new(smooth(grid(32)), &target);
        let mut prev = f64::INFINITY;
        for dt in [1e-3, 5e-4, 2.5e-4] {
            let (fe, _) = step_f_explicit(&s, &target, dt).unwrap();
            let (fi, _) = step_f_imex(&s, &target, dt, 1e-13, 5000).unwrap();
            let d = fe.values().max_distance(fi.values());
            assert!(d < prev / 3.0, "dt {dt}: {d} vs {prev}");
            prev = d;
        }
    }

    #[test]
    fn imex_keeps_circle_fixed_for_large_dt() {
        let target = SphereTarget::default();
        let g = grid(64);
        let circle = map(g, |x, _| [x.cos(), x.sin(), 0.0]);
        let s = FlowState::new(circle.clone(), &target);
        for dt in [0.01, 0.1, 1.0] {
            let (f_new, _) = step_f_imex(&s, &target, dt, 1e-12, 5000).unwrap();
            assert!(
                f_new.values().max_distance(circle.values()) <= g.h() * g.h(),
                "dt {dt}"
            );
        }
    }

    #[test]
    fn imex_nonconvergence_is_a_step_failure() {
        let target = SphereTarget::default();
        let s = FlowState::new(smooth(grid(32)), &target);
        let err = step_f_imex(&s, &target, 0.1, 1e-14, 2).unwrap_err();
        assert!(matches!(err, Error::StepFailure { .. }));
    }

    #[test]
    fn advance_constant_map_tracks_exact_decay() {
        let target = SphereTarget::default();
        let f = map(grid(16), |_, _| [0.0, 0.0, 1.0]);
        let mut s = FlowState::new(f.clone(), &target);
        let params = FlowParams {
            t_end: 3.0,
            ..Default::default()
        };
        let mut worst = 0.0f64;
        let mut samples = 0;
        let mut obs = |view: &StepView<'_>| {
            if view.sample {
                samples += 1;
            }
            let exact = (-2.0 * view.t).exp();
            for v in view.v.values() {
                worst = worst.max((v - exact).abs());
            }
            Control::Continue
        };
        let out = advance(&mut s, &target, &params, 3.0, Some(0.5), &mut obs).unwrap();
        assert_eq!(out, Outcome::Completed);
        assert_eq!(s.t, 3.0);
        assert_eq!(samples, 7);
        assert!(worst <= 1e-10, "{worst}");
        assert_eq!(s.f, f);
    }

    #[test]
    fn advance_lands_on_sample_times() {
        let target = SphereTarget::default();
        let mut s = FlowState::new(smooth(grid(16)), &target);
        let params = FlowParams::default();
        let mut times = Vec::new();
        let mut obs = |view: &StepView<'_>| {
            if view.sample {
                times.push(view.t);
            }
            Control::Continue
        };
        advance(&mut s, &target, &params, 0.1, Some(0.025), &mut obs).unwrap();
        let expect: Vec<f64> = (0..=4).map(|k| k as f64 * 0.025).collect();
        assert_eq!(times.len(), expect.len());
        for (a, b) in times.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14, "{times:?}");
        }
    }

    #[test]
    fn harmonic_map_flow_mode_keeps_v_at_one() {
        let target = SphereTarget::default();
        let mut s = FlowState::new(smooth(grid(16)), &target);
        let params = FlowParams::harmonic_map_flow();
        advance(&mut s, &target, &params, 0.05, None, &mut NoObserver).unwrap();
        assert!(s.v.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn hmf_step_matches_advance_in_hmf_mode() {
        let target = SphereTarget::default();
        let f = smooth(grid(16));
        let mut s = FlowState::new(f.clone(), &target);
        let params = FlowParams::harmonic_map_flow();
        let dt = nominal_dt(&s, &params);
        step(&mut s, &target, &params, dt).unwrap();
        assert_eq!(s.f, hmf_step(&f, &target, dt).unwrap());
    }

    #[test]
    fn observer_can_stop_the_run() {
        let target = SphereTarget::default();
        let mut s = FlowState::new(smooth(grid(16)), &target);
        let mut calls = 0;
        let mut obs = |_: &StepView<'_>| {
            calls += 1;
            if calls == 3 {
                Control::Stop
            } else {
                Control::Continue
            }
        };
        let out = advance(&mut s, &target, &FlowParams::default(), 1.0, None, &mut obs).unwrap();
        assert_eq!(out, Outcome::Stopped);
        assert_eq!(s.step_count, 2);
    }
}
