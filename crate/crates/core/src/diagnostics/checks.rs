//! Identities and inequalities evaluated over a recorded run.
//!
//! Every check is a pure function of a [`RunHistory`]. Pairwise checks scan all
//! ordered pairs of recorded times and report the pair with the least margin.

use crate::error::{invalid, Result};

use super::RunHistory;

/// Relative allowance for discretization error on the right-hand side.
pub const DISCRETIZATION_ALLOWANCE: f64 = 0.05;
/// Absolute allowance, relative to the scale of the compared quantity.
pub const ROUNDING_ALLOWANCE: f64 = 1e-6;

/// Outcome of one inequality `lhs ≤ rhs`, at its tightest recorded instance.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    pub satisfied: bool,
    /// `rhs − lhs`.
    pub slack: f64,
    /// Times `(t₁, t₂)` of the tightest pair.
    pub at: (f64, f64),
}

impl InequalityReport {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64, at: (f64, f64)) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            tol,
            satisfied: lhs <= rhs + tol,
            slack: rhs - lhs,
            at,
        }
    }

    fn trivial(name: impl Into<String>) -> Self {
        Self::new(name, 0.0, 0.0, 0.0, (0.0, 0.0))
    }

    fn margin(&self) -> f64 {
        self.rhs + self.tol - self.lhs
    }
}

impl std::fmt::Display for InequalityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} lhs={:.6e} rhs={:.6e} tol={:.3e} slack={:.6e} t=[{}, {}] {}",
            self.name,
            self.lhs,
            self.rhs,
            self.tol,
            self.slack,
            self.at.0,
            self.at.1,
            if self.satisfied { "PASS" } else { "FAIL" }
        )
    }
}

fn tolerance(scale: f64, rhs: f64) -> f64 {
    ROUNDING_ALLOWANCE * scale + DISCRETIZATION_ALLOWANCE * rhs.abs()
}

/// Worst pair for `L(t₂) − L(t₁) ≤ R(t₂) − R(t₁)` where `R` is nondecreasing.
///
/// The allowance `0.05·(R₂ − R₁)` is linear in the pair, so the margin splits
/// as `g(t₁) − g(t₂)` with `g = L − 1.05 R`; a running minimum finds the worst pair.
fn monotone_pairs(name: &str, times: &[f64], lhs: &[f64], rhs: &[f64]) -> InequalityReport {
    let scale = lhs.iter().chain(rhs).fold(0.0f64, |m, x| m.max(x.abs()));
    let g: Vec<f64> = lhs
        .iter()
        .zip(rhs)
        .map(|(l, r)| l - (1.0 + DISCRETIZATION_ALLOWANCE) * r)
        .collect();
    let mut best: Option<(usize, usize)> = None;
    let mut worst_gap = f64::INFINITY;
    let mut arg_min = 0;
    for j in 1..g.len() {
        if g[j - 1] < g[arg_min] {
            arg_min = j - 1;
        }
        let gap = g[arg_min] - g[j];
        if gap < worst_gap {
            worst_gap = gap;
            best = Some((arg_min, j));
        }
    }
    match best {
        None => InequalityReport::trivial(name),
        Some((i, j)) => {
            let r = rhs[j] - rhs[i];
            InequalityReport::new(
                name,
                lhs[j] - lhs[i],
                r,
                tolerance(scale, r),
                (times[i], times[j]),
            )
        }
    }
}

/// `|E(t₁) − E(t₂) − Σ dt·flux|` between samples `i < j`, with the
/// forward-difference energy.
pub fn energy_identity_residual_between(h: &RunHistory, i: usize, j: usize) -> f64 {
    let (a, b) = (&h.samples[i], &h.samples[j]);
    (a.energy_fd - b.energy_fd - (b.cumulative.flux - a.cumulative.flux)).abs()
}

/// Energy identity residual over the whole recorded run.
pub fn energy_identity_residual(h: &RunHistory) -> f64 {
    if h.samples.len() < 2 {
        return 0.0;
    }
    energy_identity_residual_between(h, 0, h.samples.len() - 1)
}

/// `Θ_r(t) − Θ_r(s) ≤ (8/r)·(∫_s^t ∫|df|²|f_t|²)^{1/2}·(t − s)^{1/2}` over all sample pairs.
pub fn theta_holder_check(h: &RunHistory, center: usize) -> InequalityReport {
    let name = format!("theta_holder[c{center}]");
    let r = h.config.theta_radius;
    let s = &h.samples;
    let scale = s.iter().fold(0.0f64, |m, x| m.max(x.theta[center].abs()));
    let mut worst: Option<InequalityReport> = None;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let lhs = s[j].theta[center] - s[i].theta[center];
            let q = (s[j].cumulative.df2_ft2 - s[i].cumulative.df2_ft2).max(0.0);
            let rhs = 8.0 / r * q.sqrt() * (s[j].t - s[i].t).sqrt();
            let rep =
                InequalityReport::new(&name, lhs, rhs, tolerance(scale, rhs), (s[i].t, s[j].t));
            if worst.as_ref().is_none_or(|w| rep.margin() < w.margin()) {
                worst = Some(rep);
            }
        }
    }
    worst.unwrap_or_else(|| InequalityReport::trivial(name))
}

/// `(e^{2at₂} − e^{2at₁})/a`, continuous at `a = 0`.
fn growth_factor(a: f64, t1: f64, t2: f64) -> f64 {
    if a == 0.0 {
        2.0 * (t2 - t1)
    } else {
        (2.0 * a * t1).exp() * (2.0 * a * (t2 - t1)).exp_m1() / a
    }
}

fn sample_at(h: &RunHistory, t: f64) -> Result<usize> {
    h.samples
        .iter()
        .position(|s| s.t == t)
        .ok_or_else(|| invalid(format!("no sample recorded at t = {t}")))
}

fn radius_index(h: &RunHistory, r: f64) -> Result<usize> {
    if r >= 0.5 * h.grid.length() {
        return Err(invalid(format!(
            "radius {r} is not below half the domain length"
        )));
    }
    h.config
        .ball_radii
        .iter()
        .position(|x| *x == r)
        .ok_or_else(|| invalid(format!("radius {r} is not tracked")))
}

/// `E(B_{r₁}, t₂) − E(B_{r₂}, t₁) ≤ (16/(a r²))·(e^{2at₂} − e^{2at₁})·E(0)` with
/// `r = (r₂ − r₁)/2`, worst over tracked centers.
pub fn local_energy_lemma_check(
    h: &RunHistory,
    r1: f64,
    r2: f64,
    t1: f64,
    t2: f64,
) -> Result<InequalityReport> {
    if !(r1 < r2) || !(t1 <= t2) {
        return Err(invalid("local energy check needs r₁ < r₂ and t₁ ≤ t₂"));
    }
    let (k1, k2) = (radius_index(h, r1)?, radius_index(h, r2)?);
    let (i, j) = (sample_at(h, t1)?, sample_at(h, t2)?);
    Ok(local_energy_pair(h, k1, k2, i, j))
}

fn local_energy_pair(h: &RunHistory, k1: usize, k2: usize, i: usize, j: usize) -> InequalityReport {
    let radii = &h.config.ball_radii;
    let r = 0.5 * (radii[k2] - radii[k1]);
    let e0 = h.samples[0].energy;
    let (s1, s2) = (&h.samples[i], &h.samples[j]);
    let rhs = 16.0 / (r * r) * growth_factor(h.a, s1.t, s2.t) * e0;
    let name = format!("local_energy[r{k1},r{k2}]");
    let mut worst: Option<InequalityReport> = None;
    for c in 0..h.center_nodes.len() {
        let lhs = s2.balls[h.ball_index(c, k1)] - s1.balls[h.ball_index(c, k2)];
        let rep = InequalityReport::new(&name, lhs, rhs, tolerance(e0, rhs), (s1.t, s2.t));
        if worst.as_ref().is_none_or(|w| rep.margin() < w.margin()) {
            worst = Some(rep);
        }
    }
    worst.unwrap_or_else(|| InequalityReport::trivial(name))
}

/// Local energy check for every pair of tracked radii, each at its worst pair of sample times.
pub fn local_energy_sweep(h: &RunHistory) -> Vec<InequalityReport> {
    let nr = h.config.ball_radii.len();
    let ns = h.samples.len();
    let mut out = Vec::new();
    for k1 in 0..nr {
        for k2 in k1 + 1..nr {
            let mut worst: Option<InequalityReport> = None;
            for i in 0..ns {
                for j in i..ns {
                    let rep = local_energy_pair(h, k1, k2, i, j);
                    if worst.as_ref().is_none_or(|w| rep.margin() < w.margin()) {
                        worst = Some(rep);
                    }
                }
            }
            out.extend(worst);
        }
    }
    out
}

fn moment_slot(h: &RunHistory, p: f64) -> Result<usize> {
    h.moment_index(p)
        .ok_or_else(|| invalid(format!("moment p = {p} is not tracked")))
}

/// Moment growth over all recorded step pairs.
///
/// The first report is the full form
/// `M(t₂) − M(t₁) + C₄∫∫|df|²|f_t|^{p+2} + (p+2)/2 ∫∫|∇f_t|²|f_t|^p ≤ 2a(p+1)∫∫ v|f_t|^{p+2}`;
/// when `C₄(p) ≥ 0` the simpler `M(t₂) − M(t₁) ≤ 2a(p+1)∫∫ v|f_t|^{p+2}` follows and is reported too.
pub fn moment_growth_check(h: &RunHistory, p: f64) -> Result<Vec<InequalityReport>> {
    let k = moment_slot(h, p)?;
    let c4 = h.c4[k];
    let times: Vec<f64> = h.steps.iter().map(|s| s.t).collect();
    let m: Vec<f64> = h.steps.iter().map(|s| s.moment[k]).collect();
    let rhs: Vec<f64> = h
        .steps
        .iter()
        .map(|s| 2.0 * h.a * (p + 1.0) * s.cumulative.moment[k])
        .collect();
    let full: Vec<f64> = h
        .steps
        .iter()
        .map(|s| {
            s.moment[k] + c4 * s.cumulative.df2_ft[k] + 0.5 * (p + 2.0) * s.cumulative.grad_ft[k]
        })
        .collect();
    let mut out = vec![monotone_pairs(
        &format!("moment_growth_full[p={p}]"),
        &times,
        &full,
        &rhs,
    )];
    if c4 >= 0.0 {
        out.push(monotone_pairs(
            &format!("moment_growth[p={p}]"),
            &times,
            &m,
            &rhs,
        ));
    }
    Ok(out)
}

/// `∫ v|f_t|²(t) ≤ K(0) + 2a E(0)` at every recorded step.
pub fn moment_cap_check(h: &RunHistory) -> Result<InequalityReport> {
    let k = moment_slot(h, 0.0)?;
    let name = "moment_cap";
    let (Some(first), Some(s0)) = (h.steps.first(), h.samples.first()) else {
        return Ok(InequalityReport::trivial(name));
    };
    let rhs = first.moment[k] + 2.0 * h.a * s0.energy;
    let (idx, lhs) = h
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.moment[k]))
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, x| if x.1 > acc.1 { x } else { acc },
        );
    Ok(InequalityReport::new(
        name,
        lhs,
        rhs,
        tolerance(rhs, rhs),
        (0.0, h.steps[idx].t),
    ))
}

/// Descriptive decay summary of a moment over a long run.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentLimitSummary {
    pub p: f64,
    pub initial: f64,
    /// Largest value over the last decade `[t_end/10, t_end]`.
    pub tail_max: f64,
    /// Smallest `t·M(t)` over recorded `t > 0`.
    pub min_t_moment: f64,
    /// Least-squares slope of `ln M` against `t` over the last decade; `None`
    /// if the moment vanishes there.
    pub tail_slope: Option<f64>,
}

pub fn moment_limit_report(h: &RunHistory, p: f64) -> Result<MomentLimitSummary> {
    let k = moment_slot(h, p)?;
    let steps = &h.steps;
    let t_end = steps.last().map_or(0.0, |s| s.t);
    let tail: Vec<(f64, f64)> = steps
        .iter()
        .filter(|s| s.t >= 0.1 * t_end)
        .map(|s| (s.t, s.moment[k]))
        .collect();
    let tail_max = tail.iter().fold(0.0f64, |m, x| m.max(x.1));
    let min_t_moment = steps
        .iter()
        .filter(|s| s.t > 0.0)
        .map(|s| s.t * s.moment[k])
        .fold(f64::INFINITY, f64::min);
    let tail_slope = if tail.len() >= 2 && tail.iter().all(|x| x.1 > 0.0) {
        let nn = tail.len() as f64;
        let mt = tail.iter().map(|x| x.0).sum::<f64>() / nn;
        let my = tail.iter().map(|x| x.1.ln()).sum::<f64>() / nn;
        let sxy: f64 = tail.iter().map(|x| (x.0 - mt) * (x.1.ln() - my)).sum();
        let sxx: f64 = tail.iter().map(|x| (x.0 - mt).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    Ok(MomentLimitSummary {
        p,
        initial: steps.first().map_or(0.0, |s| s.moment[k]),
        tail_max,
        min_t_moment: if min_t_moment.is_finite() {
            min_t_moment
        } else {
            0.0
        },
        tail_slope,
    })
}

/// `∫ v^{p/2}(t) ≤ ∫ v^{p/2}(s) + (2b²(p−2)/(pa))·∫_s^t ∫|df|^p` over all recorded step pairs.
pub fn e_pu_inequality_check(h: &RunHistory, p: f64) -> Result<InequalityReport> {
    if !(h.a > 0.0) {
        return Err(invalid("the e^{pu} inequality needs a > 0"));
    }
    let constant = 2.0 * h.b * h.b * (p - 2.0) / (p * h.a);
    e_pu_inequality_check_with_constant(h, p, constant)
}

/// The same comparison with an arbitrary constant in front of `∫∫|df|^p`.
pub fn e_pu_inequality_check_with_constant(
    h: &RunHistory,
    p: f64,
    constant: f64,
) -> Result<InequalityReport> {
    if !(p > 2.0) {
        return Err(invalid(format!(
            "the e^{{pu}} inequality needs p > 2, got {p}"
        )));
    }
    let k = h
        .e_pu_index(p)
        .ok_or_else(|| invalid(format!("e^{{pu}} exponent {p} is not tracked")))?;
    let times: Vec<f64> = h.steps.iter().map(|s| s.t).collect();
    let lhs: Vec<f64> = h.steps.iter().map(|s| s.v_pow[k]).collect();
    let rhs: Vec<f64> = h
        .steps
        .iter()
        .map(|s| constant * s.cumulative.df_pow[k])
        .collect();
    Ok(monotone_pairs(&format!("e_pu[p={p}]"), &times, &lhs, &rhs))
}

/// Finite-horizon stand-in for the bubble point classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PointLabel {
    Regular,
    Sequential,
    Uniform,
}

impl std::fmt::Display for PointLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PointLabel::Regular => "regular",
            PointLabel::Sequential => "sequential",
            PointLabel::Uniform => "uniform",
        })
    }
}

/// Labels a time series of ball energies by its trailing window `[t_last − window, t_last]`.
pub fn classify_series(series: &[(f64, f64)], eps2: f64, window: f64) -> PointLabel {
    let Some(&(t_last, _)) = series.last() else {
        return PointLabel::Regular;
    };
    let tail: Vec<f64> = series
        .iter()
        .filter(|x| x.0 >= t_last - window)
        .map(|x| x.1)
        .collect();
    let above = tail.iter().filter(|e| **e > eps2).count();
    if above == 0 {
        PointLabel::Regular
    } else if above == tail.len() {
        PointLabel::Uniform
    } else {
        PointLabel::Sequential
    }
}

/// Labels each tracked center using its ball of radius index `radius`.
pub fn classify_points(h: &RunHistory, radius: usize, eps2: f64, window: f64) -> Vec<PointLabel> {
    (0..h.center_nodes.len())
        .map(|c| {
            let series: Vec<(f64, f64)> = h
                .samples
                .iter()
                .map(|s| (s.t, s.balls[h.ball_index(c, radius)]))
                .collect();
            classify_series(&series, eps2, window)
        })
        .collect()
}

/// First sample at which some ball of the smallest radius holds more than `ε₁`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlowupFlag {
    pub t: f64,
    /// Grid node at the ball's center.
    pub center: usize,
    pub energy: f64,
}

pub fn blowup_detector(h: &RunHistory, eps1: f64) -> Option<BlowupFlag> {
    h.samples
        .iter()
        .find(|s| s.ball_max[0] > eps1)
        .map(|s| BlowupFlag {
            t: s.t,
            center: s.ball_argmax[0],
            energy: s.ball_max[0],
        })
}
