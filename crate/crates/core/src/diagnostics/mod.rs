//! Along-run diagnostics: energies, velocity moments, local energies, and
//! checks of the inequalities the flow satisfies.
//!
//! A [`Recorder`] is a [`FlowObserver`]. At every step it accumulates the time
//! integrals (left-point rule, with the step's actual `dt`) that the checks in
//! [`checks`] compare against; at sample times it stores a full
//! [`DiagnosticsRecord`].

pub mod checks;
pub mod local;

use crate::error::{invalid, Result};
use crate::field::{ConformalField, MapField, VectorField};
use crate::flow::{Control, FlowObserver, StepView};
use crate::grid::Grid;
use crate::stencil::{energy, energy_fd, gradient, integrate, second_derivative_density};

pub use checks::{
    blowup_detector, classify_points, classify_series, e_pu_inequality_check,
    e_pu_inequality_check_with_constant, energy_identity_residual,
    energy_identity_residual_between, local_energy_lemma_check, local_energy_sweep,
    moment_cap_check, moment_growth_check, moment_limit_report, theta_holder_check, BlowupFlag,
    InequalityReport, MomentLimitSummary, PointLabel,
};
pub use local::{ball_energy_field, Ball, ThetaTracker};

/// What to track along a run.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsConfig {
    /// Exponents `p` of the moments `∫ v |f_t|^{p+2}`.
    pub moments: Vec<f64>,
    /// Domain points; each gets a Θ tracker and one ball per radius.
    pub centers: Vec<(f64, f64)>,
    pub theta_radius: f64,
    /// Increasing ball radii; the smallest one drives the blow-up detector.
    pub ball_radii: Vec<f64>,
    /// Exponents `p > 2` for `∫ v^{p/2}` and `∫ |df|^p`.
    pub e_pu_powers: Vec<f64>,
    /// Blow-up threshold on the smallest-radius ball energy.
    pub eps1: f64,
    /// Ask the driver to stop at the first blow-up flag.
    pub stop_on_blowup: bool,
}

impl DiagnosticsConfig {
    /// Defaults for `grid`: one center mid-domain, `Θ` radius `16h` (a quarter
    /// of the domain on coarse grids), ball radii `8h, 16h, 32h` (those below
    /// half the domain).
    pub fn for_grid(grid: Grid) -> Self {
        let h = grid.h();
        let half = 0.5 * grid.length();
        Self {
            moments: vec![0.0, 2.0],
            centers: vec![(half, half)],
            theta_radius: if 16.0 * h < half {
                16.0 * h
            } else {
                0.5 * half
            },
            ball_radii: [8.0, 16.0, 32.0]
                .iter()
                .map(|k| k * h)
                .filter(|r| *r < half)
                .collect(),
            e_pu_powers: vec![6.0],
            eps1: 0.3,
            stop_on_blowup: false,
        }
    }

    pub fn validate(&self, grid: Grid) -> Result<()> {
        if self.moments.iter().any(|p| !(*p >= 0.0)) {
            return Err(invalid("moment exponents must be nonnegative"));
        }
        if self.e_pu_powers.iter().any(|p| !(*p > 2.0)) {
            return Err(invalid("e^{pu} exponents must exceed 2"));
        }
        if self.ball_radii.is_empty() {
            return Err(invalid("at least one ball radius is required"));
        }
        if self.ball_radii.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("ball radii must be strictly increasing"));
        }
        for &r in &self.ball_radii {
            Ball::new(grid, 0, r)?;
        }
        ThetaTracker::new(grid, 0, self.theta_radius)?;
        if !(self.eps1 > 0.0) {
            return Err(invalid("eps1 must be positive"));
        }
        Ok(())
    }
}

/// Running time integrals `∫_0^t (·) dt` accumulated step by step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cumulative {
    /// `∫ v|f_t|²`.
    pub flux: f64,
    /// Per moment exponent: `∫ v|f_t|^{p+2}`.
    pub moment: Vec<f64>,
    /// Per moment exponent: `∫ |df|²|f_t|^{p+2}`.
    pub df2_ft: Vec<f64>,
    /// Per moment exponent: `∫ |∇f_t|²|f_t|^p`.
    pub grad_ft: Vec<f64>,
    /// `∫ |df|²|f_t|²`.
    pub df2_ft2: f64,
    /// Per `e^{pu}` exponent: `∫ |df|^p`.
    pub df_pow: Vec<f64>,
}

/// Step-start values, one per step plus one at the final time.
#[derive(Clone, Debug, PartialEq)]
pub struct StepTrace {
    pub t: f64,
    pub dt: f64,
    /// Per moment exponent.
    pub moment: Vec<f64>,
    /// Per `e^{pu}` exponent: `∫ v^{p/2}`.
    pub v_pow: Vec<f64>,
    /// Integrals over `[0, t]`.
    pub cumulative: Cumulative,
}

/// One time sample of every tracked scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub step: u64,
    /// Central-difference energy.
    pub energy: f64,
    /// Forward-difference energy, the one the discrete energy identity balances.
    pub energy_fd: f64,
    pub flux: f64,
    pub sup_df: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub grad2_energy: f64,
    /// Per moment exponent.
    pub moments: Vec<f64>,
    /// Per center.
    pub theta: Vec<f64>,
    /// Center-major: `balls[c * radii + k]`.
    pub balls: Vec<f64>,
    /// `∫_B v⁹` over the same balls.
    pub ball_v9: Vec<f64>,
    /// Per radius: largest ball energy over all centers on the grid.
    pub ball_max: Vec<f64>,
    pub ball_argmax: Vec<usize>,
    /// Per `e^{pu}` exponent: `∫ v^{p/2}`.
    pub v_pow: Vec<f64>,
    pub cumulative: Cumulative,
}

impl DiagnosticsRecord {
    /// Largest ball energy at the smallest tracked radius.
    pub fn local_energy_max(&self) -> f64 {
        self.ball_max[0]
    }
}

/// Everything a run recorded.
#[derive(Clone, Debug)]
pub struct RunHistory {
    pub grid: Grid,
    pub config: DiagnosticsConfig,
    pub a: f64,
    pub b: f64,
    pub c4: Vec<f64>,
    pub center_nodes: Vec<usize>,
    pub samples: Vec<DiagnosticsRecord>,
    pub steps: Vec<StepTrace>,
    pub blowup: Option<BlowupFlag>,
}

impl RunHistory {
    pub fn ball_index(&self, center: usize, radius: usize) -> usize {
        center * self.config.ball_radii.len() + radius
    }

    pub fn moment_index(&self, p: f64) -> Option<usize> {
        self.config.moments.iter().position(|q| *q == p)
    }

    pub fn e_pu_index(&self, p: f64) -> Option<usize> {
        self.config.e_pu_powers.iter().position(|q| *q == p)
    }
}

/// `x^e`, with an integer power when `e` is integral.
fn pow(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() <= 64.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// Integrands that depend only on `(f_t, v, |df|²)` at one node.
struct Integrands {
    flux: Vec<f64>,
    moment: Vec<Vec<f64>>,
    df2_ft: Vec<Vec<f64>>,
    grad_ft: Vec<Vec<f64>>,
    df2_ft2: Vec<f64>,
}

fn integrands(ps: &[f64], ft: &VectorField, v: &[f64], density: &[f64]) -> Integrands {
    let ft2 = ft.norm_sq();
    let grad_ft2 = gradient(ft).density();
    let mk = |f: &dyn Fn(usize, f64) -> f64| -> Vec<Vec<f64>> {
        ps.iter()
            .map(|&p| (0..ft2.len()).map(|k| f(k, p)).collect())
            .collect()
    };
    Integrands {
        flux: (0..ft2.len()).map(|k| v[k] * ft2[k]).collect(),
        moment: mk(&|k, p| v[k] * pow(ft2[k], 0.5 * p + 1.0)),
        df2_ft: mk(&|k, p| density[k] * pow(ft2[k], 0.5 * p + 1.0)),
        grad_ft: mk(&|k, p| grad_ft2[k] * pow(ft2[k], 0.5 * p)),
        df2_ft2: (0..ft2.len()).map(|k| density[k] * ft2[k]).collect(),
    }
}

/// Observer that fills a [`RunHistory`].
pub struct Recorder {
    history: RunHistory,
    balls: Vec<Ball>,
    trackers: Vec<ThetaTracker>,
    cumulative: Cumulative,
}

impl Recorder {
    pub fn new(grid: Grid, config: DiagnosticsConfig, a: f64, b: f64, c_n: f64) -> Result<Self> {
        config.validate(grid)?;
        let center_nodes: Vec<usize> = config
            .centers
            .iter()
            .map(|&(x, y)| grid.nearest_node(x, y))
            .collect();
        let mut balls = Vec::new();
        for &c in &center_nodes {
            for &r in &config.ball_radii {
                balls.push(Ball::new(grid, c, r)?);
            }
        }
        let trackers = center_nodes
            .iter()
            .map(|&c| ThetaTracker::new(grid, c, config.theta_radius))
            .collect::<Result<_>>()?;
        let params = crate::params::FlowParams {
            a,
            b,
            c_n,
            ..Default::default()
        };
        let c4 = config.moments.iter().map(|&p| params.c4(p)).collect();
        let cumulative = Cumulative {
            moment: vec![0.0; config.moments.len()],
            df2_ft: vec![0.0; config.moments.len()],
            grad_ft: vec![0.0; config.moments.len()],
            df_pow: vec![0.0; config.e_pu_powers.len()],
            ..Default::default()
        };
        Ok(Self {
            history: RunHistory {
                grid,
                config,
                a,
                b,
                c4,
                center_nodes,
                samples: Vec::new(),
                steps: Vec::new(),
                blowup: None,
            },
            balls,
            trackers,
            cumulative,
        })
    }

    pub fn history(&self) -> &RunHistory {
        &self.history
    }

    pub fn into_history(self) -> RunHistory {
        self.history
    }

    /// Records one step start (and a sample if `sample`); returns the detector's verdict.
    pub fn record(
        &mut self,
        t: f64,
        dt: f64,
        step: u64,
        f: &MapField,
        v: &ConformalField,
        ft: &VectorField,
        density: &[f64],
        sample: bool,
    ) -> Result<Control> {
        let grid = self.history.grid;
        let cfg = &self.history.config;
        let ig = integrands(&cfg.moments, ft, v.values(), density);
        let moment: Vec<f64> = ig.moment.iter().map(|m| integrate(grid, m)).collect();
        let v_pow: Vec<f64> = cfg
            .e_pu_powers
            .iter()
            .map(|&p| {
                integrate(
                    grid,
                    &v.values()
                        .iter()
                        .map(|x| pow(*x, 0.5 * p))
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        let flux = integrate(grid, &ig.flux);

        let mut control = Control::Continue;
        if sample && self.history.samples.last().is_none_or(|s| s.t < t) {
            let rec = self.sample(t, step, f, v, density, flux, &moment, &v_pow)?;
            if self.history.blowup.is_none() && rec.ball_max[0] > cfg.eps1 {
                self.history.blowup = Some(BlowupFlag {
                    t,
                    center: rec.ball_argmax[0],
                    energy: rec.ball_max[0],
                });
                if cfg.stop_on_blowup {
                    control = Control::Stop;
                }
            }
            self.history.samples.push(rec);
        }

        self.history.steps.push(StepTrace {
            t,
            dt,
            moment,
            v_pow,
            cumulative: self.cumulative.clone(),
        });
        if dt > 0.0 {
            let c = &mut self.cumulative;
            c.flux += dt * flux;
            c.df2_ft2 += dt * integrate(grid, &ig.df2_ft2);
            for (k, m) in self.history.steps.last().unwrap().moment.iter().enumerate() {
                c.moment[k] += dt * m;
                c.df2_ft[k] += dt * integrate(grid, &ig.df2_ft[k]);
                c.grad_ft[k] += dt * integrate(grid, &ig.grad_ft[k]);
            }
            for (k, &p) in cfg.e_pu_powers.iter().enumerate() {
                let vals: Vec<f64> = density.iter().map(|d| pow(*d, 0.5 * p)).collect();
                c.df_pow[k] += dt * integrate(grid, &vals);
            }
        }
        Ok(control)
    }

    #[allow(clippy::too_many_arguments)]
    fn sample(
        &self,
        t: f64,
        step: u64,
        f: &MapField,
        v: &ConformalField,
        density: &[f64],
        flux: f64,
        moments: &[f64],
        v_pow: &[f64],
    ) -> Result<DiagnosticsRecord> {
        let grid = self.history.grid;
        let v9: Vec<f64> = v.values().iter().map(|x| x.powi(9)).collect();
        let mut ball_max = Vec::new();
        let mut ball_argmax = Vec::new();
        for &r in &self.history.config.ball_radii {
            let field = ball_energy_field(grid, density, r)?;
            let (k, e) = field
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (k, &e)| {
                        if e > acc.1 {
                            (k, e)
                        } else {
                            acc
                        }
                    },
                );
            ball_max.push(e);
            ball_argmax.push(k);
        }
        Ok(DiagnosticsRecord {
            t,
            step,
            energy: energy(f),
            energy_fd: energy_fd(f),
            flux,
            sup_df: density.iter().cloned().fold(0.0, f64::max).sqrt(),
            min_v: v.min(),
            max_v: v.max(),
            grad2_energy: integrate(grid, &second_derivative_density(f)),
            moments: moments.to_vec(),
            theta: self
                .trackers
                .iter()
                .map(|tr| tr.theta(grid, density))
                .collect(),
            balls: self.balls.iter().map(|b| b.energy(grid, density)).collect(),
            ball_v9: self.balls.iter().map(|b| b.integral(grid, &v9)).collect(),
            ball_max,
            ball_argmax,
            v_pow: v_pow.to_vec(),
            cumulative: self.cumulative.clone(),
        })
    }
}

impl FlowObserver for Recorder {
    fn observe(&mut self, view: &StepView<'_>) -> Control {
        // every input is already validated, so recording cannot fail
        self.record(
            view.t,
            view.dt,
            view.step,
            view.f,
            view.v,
            view.ft,
            view.density,
            view.sample,
        )
        .expect("diagnostics configuration was validated")
    }
}
