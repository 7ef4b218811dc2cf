//! Orchestration and file output for `run`, `compare` and `check`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::diagnostics::{self as diag, BlowupFlag, Recorder, RunHistory};
use crate::error::{invalid, Error, Result};
use crate::field::{ConformalField, MapField};
use crate::flow::{advance, Control, FlowObserver, FlowState, Outcome, StepView};
use crate::scenario::generate;
use crate::target::Target;

/// How a run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Completed,
    StepFailure(String),
    BlowupStop(BlowupFlag),
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Completed => 0,
            RunStatus::StepFailure(_) => 2,
            RunStatus::BlowupStop(_) => 3,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::StepFailure(_) => "step_failure",
            RunStatus::BlowupStop(_) => "blowup_stop",
        }
    }
}

/// A finished simulation, before anything is written.
pub struct Simulation {
    pub status: RunStatus,
    pub history: RunHistory,
    pub state: FlowState,
}

/// Writes `CHFSNAP1` snapshot text: a header, then one row per node of the
/// map components followed by `v`, row-major.
pub fn write_snapshot(
    out: &mut impl Write,
    t: f64,
    f: &MapField,
    v: &ConformalField,
) -> std::io::Result<()> {
    let grid = f.grid();
    writeln!(out, "CHFSNAP1 n={} L={} t={:.16e}", grid.n(), f.dim(), t)?;
    for idx in 0..grid.len() {
        let mut line = String::new();
        for x in f.node(idx) {
            write!(line, "{x:.16e} ").unwrap();
        }
        writeln!(out, "{line}{:.16e}", v.values()[idx])?;
    }
    Ok(())
}

fn snapshot_file(
    dir: &Path,
    step: u64,
    t: f64,
    f: &MapField,
    v: &ConformalField,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(dir.join(format!("snap_{step}.dat")))?);
    write_snapshot(&mut w, t, f, v)?;
    w.flush()
}

struct RunObserver<'a> {
    recorder: Recorder,
    snapshots: Option<(&'a Path, u64)>,
    last_snapshot: Option<u64>,
    io_error: Option<std::io::Error>,
}

impl FlowObserver for RunObserver<'_> {
    fn observe(&mut self, view: &StepView<'_>) -> Control {
        if let Some((dir, every)) = self.snapshots {
            let due =
                view.step == 0 || view.dt == 0.0 || (every > 0 && view.step.is_multiple_of(every));
            if due && self.last_snapshot != Some(view.step) {
                if let Err(e) = snapshot_file(dir, view.step, view.t, view.f, view.v) {
                    self.io_error = Some(e);
                    return Control::Stop;
                }
                self.last_snapshot = Some(view.step);
            }
        }
        self.recorder.observe(view)
    }
}

/// Runs the configured simulation, writing snapshots into `snapshot_dir` if given.
pub fn simulate(config: &RunConfig, snapshot_dir: Option<&Path>) -> Result<Simulation> {
    let f0 = generate(&config.scenario, config.grid, config.target.ambient_dim())?;
    let mut state = FlowState::new(f0, &config.target);
    let recorder = Recorder::new(
        config.grid,
        config.diagnostics.clone(),
        config.flow.a,
        config.flow.b,
        config.flow.c_n,
    )?;
    let mut obs = RunObserver {
        recorder,
        snapshots: snapshot_dir.map(|d| (d, config.snapshot_every)),
        last_snapshot: None,
        io_error: None,
    };
    let result = advance(
        &mut state,
        &config.target,
        &config.flow,
        config.flow.t_end,
        Some(config.sample_dt),
        &mut obs,
    );
    if let Some(e) = obs.io_error.take() {
        return Err(Error::Io(e));
    }
    let status = match result {
        Ok(Outcome::Completed) => RunStatus::Completed,
        Ok(Outcome::Stopped) => {
            RunStatus::BlowupStop(obs.recorder.history().blowup.expect("stop implies a flag"))
        }
        Err(e @ (Error::StepFailure { .. } | Error::ProjectionFailure { .. })) => {
            if let Some((dir, _)) = obs.snapshots {
                snapshot_file(dir, state.step_count, state.t, &state.f, &state.v)?;
            }
            RunStatus::StepFailure(e.to_string())
        }
        Err(e) => return Err(e),
    };
    Ok(Simulation {
        status,
        history: obs.recorder.into_history(),
        state,
    })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `run.csv`: the documented leading columns, then the extra tracked scalars.
pub fn csv_header(h: &RunHistory) -> Vec<String> {
    let cfg = &h.config;
    let mut cols: Vec<String> = ["t", "energy", "flux", "sup_df", "min_v", "max_v", "grad2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(cfg.moments.iter().map(|p| format!("m{p}")));
    cols.extend((0..cfg.centers.len()).map(|i| format!("theta_{i}")));
    let nb = cfg.centers.len() * cfg.ball_radii.len();
    cols.extend((0..nb).map(|k| format!("ball_{k}")));
    cols.push("energy_fd".into());
    cols.push("local_energy_max".into());
    cols.extend((0..cfg.ball_radii.len()).map(|k| format!("ball_max_{k}")));
    cols.extend((0..nb).map(|k| format!("ball_v9_{k}")));
    cols.extend(cfg.e_pu_powers.iter().map(|p| format!("v_pow_{p}")));
    cols.push("cum_flux".into());
    cols.push("cum_df2_ft2".into());
    cols.extend(cfg.e_pu_powers.iter().map(|p| format!("cum_df_pow_{p}")));
    cols
}

pub fn write_csv(out: &mut impl Write, h: &RunHistory) -> std::io::Result<()> {
    writeln!(out, "{}", csv_header(h).join(","))?;
    for s in &h.samples {
        let mut row: Vec<f64> = vec![
            s.t,
            s.energy,
            s.flux,
            s.sup_df,
            s.min_v,
            s.max_v,
            s.grad2_energy,
        ];
        row.extend(&s.moments);
        row.extend(&s.theta);
        row.extend(&s.balls);
        row.push(s.energy_fd);
        row.push(s.local_energy_max());
        row.extend(&s.ball_max);
        row.extend(&s.ball_v9);
        row.extend(&s.v_pow);
        row.push(s.cumulative.flux);
        row.push(s.cumulative.df2_ft2);
        row.extend(&s.cumulative.df_pow);
        writeln!(
            out,
            "{}",
            row.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
        )?;
    }
    Ok(())
}

/// One line per check plus descriptive summaries.
pub fn inequality_report(config: &RunConfig, h: &RunHistory) -> Vec<String> {
    let mut lines = vec![format!(
        "energy_identity_residual {:.6e}",
        diag::energy_identity_residual(h)
    )];
    let line = |name: &str, r: Result<diag::InequalityReport>| match r {
        Ok(rep) => rep.to_string(),
        Err(e) => format!("{name} SKIP {e}"),
    };
    for &p in &h.config.moments {
        match diag::moment_growth_check(h, p) {
            Ok(reps) => lines.extend(reps.iter().map(|r| r.to_string())),
            Err(e) => lines.push(line(&format!("moment_growth[p={p}]"), Err(e))),
        }
    }
    lines.push(line("moment_cap", diag::moment_cap_check(h)));
    for &p in &h.config.e_pu_powers {
        lines.push(line(
            &format!("e_pu[p={p}]"),
            diag::e_pu_inequality_check(h, p),
        ));
    }
    for c in 0..h.center_nodes.len() {
        lines.push(diag::theta_holder_check(h, c).to_string());
    }
    lines.extend(diag::local_energy_sweep(h).iter().map(|r| r.to_string()));
    for &p in &h.config.moments {
        if let Ok(m) = diag::moment_limit_report(h, p) {
            lines.push(format!(
                "moment_limit[p={p}] initial={:.6e} tail_max={:.6e} min_t_moment={:.6e} tail_slope={}",
                m.initial,
                m.tail_max,
                m.min_t_moment,
                m.tail_slope.map_or("none".to_string(), |s| format!("{s:.6e}"))
            ));
        }
    }
    let labels = diag::classify_points(h, 0, config.eps2, config.classify_window);
    for (c, label) in labels.iter().enumerate() {
        lines.push(format!("classify[c{c}] {label}"));
    }
    match diag::blowup_detector(h, h.config.eps1) {
        Some(f) => lines.push(format!(
            "blowup_flag t={} center={} energy={:.6e}",
            f.t, f.center, f.energy
        )),
        None => lines.push("blowup_flag none".into()),
    }
    if let Some(last) = h.samples.last() {
        let verdict = if last.energy < config.eps0 {
            "below"
        } else {
            "not_below"
        };
        lines.push(format!(
            "energy_gap final_energy={:.6e} eps0={} {verdict}",
            last.energy, config.eps0
        ));
    }
    lines
}

/// Provenance line: crate version and a hash of the canonical configuration.
pub fn provenance(config: &RunConfig) -> String {
    let digest = Sha256::digest(config.echo.join("\n").as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!(
        "provenance chflow {} config-sha256 {hex}",
        env!("CARGO_PKG_VERSION")
    )
}

fn meta_lines(config: &RunConfig, sim: &Simulation) -> Vec<String> {
    let mut lines = config.echo.clone();
    lines.push(provenance(config));
    lines.push(format!("status {}", sim.status.label()));
    if let RunStatus::StepFailure(reason) = &sim.status {
        lines.push(format!("failure {reason}"));
    }
    match sim.history.blowup {
        Some(f) => {
            let (x, y) = config.grid.position(f.center);
            lines.push(format!(
                "blowup_flag t={} center={x}:{y} energy={:.6e}",
                f.t, f.energy
            ));
        }
        None => lines.push("blowup_flag none".into()),
    }
    lines.push(format!("steps {}", sim.state.step_count));
    lines.push(format!("t_final {}", sim.state.t));
    lines
}

fn write_lines(path: PathBuf, lines: &[String]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `config` and writes `run.csv`, `inequalities.txt`, `meta.txt` and snapshots into `out`.
pub fn run(config: &RunConfig, out: &Path) -> Result<(RunStatus, RunHistory)> {
    fs::create_dir_all(out)?;
    let sim = simulate(config, Some(out))?;
    let mut w = BufWriter::new(fs::File::create(out.join("run.csv"))?);
    write_csv(&mut w, &sim.history)?;
    w.flush()?;
    write_lines(
        out.join("inequalities.txt"),
        &inequality_report(config, &sim.history),
    )?;
    write_lines(out.join("meta.txt"), &meta_lines(config, &sim))?;
    Ok((sim.status, sim.history))
}

/// Runs two configurations side by side into `out/a` and `out/b` and writes
/// `compare.csv` over their common sample times.
pub fn compare(a: &RunConfig, b: &RunConfig, out: &Path) -> Result<(RunStatus, RunStatus)> {
    if a.grid != b.grid || a.scenario != b.scenario || a.target != b.target {
        return Err(invalid(
            "compared configurations must share grid, target and initial data",
        ));
    }
    let (da, db) = (out.join("a"), out.join("b"));
    let (ra, rb) = std::thread::scope(|s| {
        let ja = s.spawn(|| run(a, &da));
        let jb = s.spawn(|| run(b, &db));
        (
            ja.join().expect("run a panicked"),
            jb.join().expect("run b panicked"),
        )
    });
    let ((sa, ha), (sb, hb)) = (ra?, rb?);
    let mut w = BufWriter::new(fs::File::create(out.join("compare.csv"))?);
    writeln!(
        w,
        "t,sup_df_a,local_energy_max_a,min_v_a,sup_df_b,local_energy_max_b,min_v_b"
    )?;
    for x in &ha.samples {
        if let Some(y) = hb.samples.iter().find(|y| y.t == x.t) {
            let row = [
                x.t,
                x.sup_df,
                x.local_energy_max(),
                x.min_v,
                y.sup_df,
                y.local_energy_max(),
                y.min_v,
            ];
            writeln!(
                w,
                "{}",
                row.iter().map(|v| num(*v)).collect::<Vec<_>>().join(",")
            )?;
        }
    }
    w.flush()?;
    Ok((sa, sb))
}

/// One line of the built-in invariant suite.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn quick(text: &str) -> Result<Simulation> {
    simulate(&crate::config::parse_config(text)?, None)
}

/// Fast invariant checks on small canned scenarios.
pub fn check() -> Result<Vec<CheckOutcome>> {
    use crate::flow::{hmf_step, step};
    use crate::params::FlowParams;
    use crate::target::SphereTarget;
    let mut out = Vec::new();

    let sim = quick("grid.n=32\ninit.kind=constant\nflow.t_end=1\ndiag.sample_dt=0.05")?;
    let err = (0..sim.state.v.values().len())
        .map(|k| (sim.state.v.values()[k] - (-2.0 * sim.state.t).exp()).abs())
        .fold(0.0, f64::max);
    out.push(CheckOutcome {
        name: "constant_map_conformal_decay",
        passed: err <= 1e-10,
        detail: format!("max |v - e^-2t| = {err:e}"),
    });
    let zero = sim.history.samples.iter().all(|s| s.energy == 0.0);
    out.push(CheckOutcome {
        name: "constant_map_zero_energy",
        passed: zero,
        detail: String::new(),
    });

    let sim = quick("grid.n=32\ninit.kind=circle\nflow.t_end=0.25")?;
    let f0 = generate(
        &crate::scenario::Scenario::new(crate::scenario::ScenarioKind::Circle),
        sim.state.grid(),
        3,
    )?;
    let moved = sim.state.f.values().max_distance(f0.values());
    let h = sim.state.grid().h();
    out.push(CheckOutcome {
        name: "circle_map_fixed_point",
        passed: moved <= h * h * sim.state.t,
        detail: format!(
            "max displacement {moved:e}, bound h²t = {:e}",
            h * h * sim.state.t
        ),
    });

    let residuals: Vec<f64> = [0.25, 0.125]
        .iter()
        .map(|cfl| {
            quick(&format!(
                "grid.n=64\ninit.kind=perturbed\nflow.t_end=0.1\nflow.cfl={cfl}"
            ))
            .map(|s| diag::energy_identity_residual(&s.history))
        })
        .collect::<Result<_>>()?;
    let ratio = residuals[0] / residuals[1];
    out.push(CheckOutcome {
        name: "energy_identity_first_order",
        passed: ratio >= 1.8,
        detail: format!(
            "residuals {:e} {:e}, ratio {ratio:.3}",
            residuals[0], residuals[1]
        ),
    });

    let sim = quick("grid.n=32\ninit.kind=perturbed\nflow.t_end=0.1")?;
    let mut ok = true;
    for p in [0.0, 2.0] {
        ok &= diag::moment_growth_check(&sim.history, p)?
            .iter()
            .all(|r| r.satisfied);
    }
    ok &= diag::moment_cap_check(&sim.history)?.satisfied;
    out.push(CheckOutcome {
        name: "moment_inequalities",
        passed: ok,
        detail: String::new(),
    });

    let target = SphereTarget::default();
    let s = crate::scenario::Scenario::new(crate::scenario::ScenarioKind::Perturbed);
    let f0 = generate(
        &s,
        crate::grid::Grid::new(32, 2.0 * std::f64::consts::PI)?,
        3,
    )?;
    let params = FlowParams::default();
    let steps = |f: MapField| -> Result<FlowState> {
        let mut st = FlowState::new(f, &target);
        for _ in 0..20 {
            let dt = crate::flow::stable_dt(&st, params.cfl);
            step(&mut st, &target, &params, dt)?;
        }
        Ok(st)
    };
    let base = steps(f0.clone())?;
    let rot = [0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
    let rotated = steps(f0.rotated(&rot)?)?;
    out.push(CheckOutcome {
        name: "rotation_equivariance",
        passed: rotated.f == base.f.rotated(&rot)? && rotated.v == base.v,
        detail: String::new(),
    });
    let shifted = steps(f0.shifted(5, -3))?;
    out.push(CheckOutcome {
        name: "translation_equivariance",
        passed: shifted.f == base.f.shifted(5, -3) && shifted.v == base.v.shifted(5, -3),
        detail: String::new(),
    });

    let hmf = FlowParams::harmonic_map_flow();
    let mut st = FlowState::new(f0.clone(), &target);
    let mut f = f0;
    let mut same = true;
    for _ in 0..20 {
        let dt = crate::flow::stable_dt(&st, hmf.cfl);
        step(&mut st, &target, &hmf, dt)?;
        f = hmf_step(&f, &target, dt)?;
        same &= st.f == f;
    }
    out.push(CheckOutcome {
        name: "harmonic_map_flow_baseline",
        passed: same,
        detail: String::new(),
    });
    Ok(out)
}
