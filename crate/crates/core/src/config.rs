//! Flat `key=value` run configuration.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. Every key
//! is optional. Numbers may be written as products and quotients of decimal
//! literals, `pi`, and `h` (the grid spacing), e.g. `2*pi` or `8*h`. Lists are
//! comma separated; points are written `x:y`.

use std::collections::HashMap;
use std::path::PathBuf;

use crate::diagnostics::DiagnosticsConfig;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::{FlowParams, ImexSettings, Scheme};
use crate::scenario::{Scenario, ScenarioKind};
use crate::target::SphereTarget;

/// Runs longer than this pick the semi-implicit scheme under `flow.scheme=auto`.
pub const AUTO_IMEX_T_END: f64 = 5.0;

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "grid.n",
    "grid.length",
    "target.ambient_dim",
    "flow.a",
    "flow.b",
    "flow.c_n",
    "flow.scheme",
    "flow.cfl",
    "flow.t_end",
    "flow.imex_dt_cap",
    "flow.imex_tol",
    "flow.imex_max_iter",
    "init.kind",
    "init.amplitude",
    "init.scale",
    "init.center",
    "init.seed",
    "init.phase",
    "diag.sample_dt",
    "diag.moments",
    "diag.theta_centers",
    "diag.theta_radius",
    "diag.ball_radii",
    "diag.e_pu_powers",
    "diag.classify_window",
    "diag.stop_on_blowup",
    "thresholds.eps0",
    "thresholds.eps1",
    "thresholds.eps2",
    "output.dir",
    "output.snapshot_every",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub target: SphereTarget,
    pub flow: FlowParams,
    pub scenario: Scenario,
    pub diagnostics: DiagnosticsConfig,
    pub sample_dt: f64,
    pub classify_window: f64,
    pub eps0: f64,
    pub eps2: f64,
    pub output_dir: PathBuf,
    /// Write a snapshot every this many steps; `0` keeps only the first and last.
    pub snapshot_every: u64,
    /// Canonical `key=value` lines for every key, defaults included.
    pub echo: Vec<String>,
    pub warnings: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

struct Entries {
    map: HashMap<&'static str, (usize, String)>,
    h: f64,
}

fn err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn eval_expr(text: &str, h: f64) -> std::result::Result<f64, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty number".into());
    }
    let atom = |s: &str| -> std::result::Result<f64, String> {
        match s.trim() {
            "pi" => Ok(std::f64::consts::PI),
            "h" if h.is_finite() => Ok(h),
            "h" => Err("`h` is not available before the grid is known".into()),
            other => other
                .parse::<f64>()
                .map_err(|_| format!("`{other}` is not a number")),
        }
    };
    let mut value = 1.0;
    let mut op = '*';
    let mut start = 0;
    for (i, c) in text
        .char_indices()
        .chain(std::iter::once((text.len(), '*')))
    {
        // keep exponent signs like 1e-3 inside the literal
        if (c == '*' || c == '/') && i > start {
            let x = atom(&text[start..i])?;
            value = if op == '*' { value * x } else { value / x };
            op = c;
            start = i + 1;
        } else if c == '*' || c == '/' {
            return Err(format!("malformed expression `{text}`"));
        }
    }
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    Ok(value)
}

impl Entries {
    fn raw(&self, key: &'static str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn line(&self, key: &'static str) -> usize {
        self.map.get(key).map_or(0, |e| e.0)
    }

    fn num(&self, key: &'static str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => eval_expr(v, self.h).map_err(|m| err(line, key, m)),
        }
    }

    fn opt_num(&self, key: &'static str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some((_, "auto")) => Ok(None),
            Some(_) => self.num(key, 0.0).map(Some),
        }
    }

    fn int(&self, key: &'static str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => v
                .trim()
                .parse()
                .map_err(|_| err(line, key, format!("`{v}` is not a nonnegative integer"))),
        }
    }

    fn parsed<T: std::str::FromStr<Err = String>>(
        &self,
        key: &'static str,
        default: T,
    ) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => v.trim().parse().map_err(|m| err(line, key, m)),
        }
    }

    fn boolean(&self, key: &'static str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some((_, "true")) => Ok(true),
            Some((_, "false")) => Ok(false),
            Some((line, v)) => Err(err(line, key, format!("`{v}` is not true or false"))),
        }
    }

    fn list(&self, key: &'static str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.raw(key) {
            None => Ok(default),
            Some((_, v)) if v.trim().is_empty() => Ok(Vec::new()),
            Some((line, v)) => v
                .split(',')
                .map(|x| eval_expr(x, self.h).map_err(|m| err(line, key, m)))
                .collect(),
        }
    }

    fn point(&self, key: &'static str, text: &str, line: usize) -> Result<(f64, f64)> {
        let (x, y) = text
            .split_once(':')
            .ok_or_else(|| err(line, key, format!("`{text}` is not a point x:y")))?;
        Ok((
            eval_expr(x, self.h).map_err(|m| err(line, key, m))?,
            eval_expr(y, self.h).map_err(|m| err(line, key, m))?,
        ))
    }

    fn points(&self, key: &'static str, default: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
        match self.raw(key) {
            None => Ok(default),
            Some((_, v)) if v.trim().is_empty() => Ok(Vec::new()),
            Some((line, v)) => v
                .split(',')
                .map(|p| self.point(key, p.trim(), line))
                .collect(),
        }
    }
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn fmt_points(ps: &[(f64, f64)]) -> String {
    ps.iter()
        .map(|(x, y)| format!("{x}:{y}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Parses and validates a configuration; omitted keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut map = HashMap::new();
    for (k, raw_line) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, content, "expected key=value"))?;
        let key = key.trim();
        let known = KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| err(line, key, "unknown key"))?;
        if map
            .insert(*known, (line, value.trim().to_string()))
            .is_some()
        {
            return Err(err(line, key, "duplicate key"));
        }
    }
    let mut e = Entries { map, h: f64::NAN };

    let n = e.int("grid.n", 64)?;
    let length = e.num("grid.length", 2.0 * std::f64::consts::PI)?;
    let grid = Grid::new(n as usize, length)
        .map_err(|m| err(e.line("grid.n"), "grid.n", m.to_string()))?;
    e.h = grid.h();

    let dim = e.int("target.ambient_dim", 3)? as usize;
    let target = SphereTarget::new(dim).map_err(|m| {
        err(
            e.line("target.ambient_dim"),
            "target.ambient_dim",
            m.to_string(),
        )
    })?;

    let t_end = e.num("flow.t_end", 1.0)?;
    let scheme = match e.raw("flow.scheme") {
        None | Some((_, "auto")) => {
            if t_end > AUTO_IMEX_T_END {
                Scheme::Imex
            } else {
                Scheme::Explicit
            }
        }
        Some(_) => e.parsed("flow.scheme", Scheme::Explicit)?,
    };
    let defaults = ImexSettings::default();
    let flow = FlowParams {
        a: e.num("flow.a", 1.0)?,
        b: e.num("flow.b", 4.0)?,
        c_n: e.num("flow.c_n", 1.0)?,
        scheme,
        cfl: e.num("flow.cfl", 0.25)?,
        t_end,
        imex: ImexSettings {
            dt_cap: e.opt_num("flow.imex_dt_cap")?,
            tol: e.num("flow.imex_tol", defaults.tol)?,
            max_iter: e.int("flow.imex_max_iter", defaults.max_iter as u64)? as usize,
        },
    };
    flow.validate().map_err(|m| err(0, "flow", m.to_string()))?;
    let mut warnings = Vec::new();
    if !flow.standing_assumption_holds() {
        let w = format!(
            "standing assumption b > 2C_N²+C_N violated (b = {}, C_N = {}); inequality checks lose their guarantee",
            flow.b, flow.c_n
        );
        log::warn!("{w}");
        warnings.push(w);
    }

    let center = match e.raw("init.center") {
        None | Some((_, "auto")) => None,
        Some((line, v)) => Some(e.point("init.center", v.trim(), line)?),
    };
    let scenario = Scenario {
        kind: e.parsed::<ScenarioKind>("init.kind", ScenarioKind::Constant)?,
        amplitude: e.num("init.amplitude", 0.2)?,
        scale: e.num("init.scale", 0.25)?,
        center,
        seed: e.int("init.seed", 1)?,
        phase: e.num("init.phase", 0.0)?,
    };
    crate::scenario::generate(&scenario, grid, dim)
        .map_err(|m| err(e.line("init.kind"), "init.kind", m.to_string()))?;

    let base = DiagnosticsConfig::for_grid(grid);
    let diagnostics = DiagnosticsConfig {
        moments: e.list("diag.moments", base.moments.clone())?,
        centers: e.points("diag.theta_centers", base.centers.clone())?,
        theta_radius: e.num("diag.theta_radius", base.theta_radius)?,
        ball_radii: e.list("diag.ball_radii", base.ball_radii.clone())?,
        e_pu_powers: e.list("diag.e_pu_powers", base.e_pu_powers.clone())?,
        eps1: e.num("thresholds.eps1", 0.3)?,
        stop_on_blowup: e.boolean("diag.stop_on_blowup", false)?,
    };
    diagnostics
        .validate(grid)
        .map_err(|m| err(0, "diag", m.to_string()))?;
    let sample_dt = e.num("diag.sample_dt", t_end / 100.0)?;
    if !(sample_dt > 0.0) {
        return Err(err(
            e.line("diag.sample_dt"),
            "diag.sample_dt",
            "must be positive",
        ));
    }
    let classify_window = e.num("diag.classify_window", t_end / 10.0)?;
    let eps0 = e.num("thresholds.eps0", 0.5)?;
    let eps2 = e.num("thresholds.eps2", 0.3)?;
    for (key, v) in [
        ("thresholds.eps0", eps0),
        ("thresholds.eps2", eps2),
        ("diag.classify_window", classify_window),
    ] {
        if !(v >= 0.0) {
            return Err(err(0, key, "must be nonnegative"));
        }
    }
    let output_dir = PathBuf::from(e.raw("output.dir").map_or("out", |(_, v)| v));
    let snapshot_every = e.int("output.snapshot_every", 0)?;

    let echo = vec![
        format!("grid.n={n}"),
        format!("grid.length={length}"),
        format!("target.ambient_dim={dim}"),
        format!("flow.a={}", flow.a),
        format!("flow.b={}", flow.b),
        format!("flow.c_n={}", flow.c_n),
        format!("flow.scheme={}", flow.scheme),
        format!("flow.cfl={}", flow.cfl),
        format!("flow.t_end={}", flow.t_end),
        format!(
            "flow.imex_dt_cap={}",
            flow.imex
                .dt_cap
                .map_or("auto".to_string(), |x| x.to_string())
        ),
        format!("flow.imex_tol={}", flow.imex.tol),
        format!("flow.imex_max_iter={}", flow.imex.max_iter),
        format!("init.kind={}", scenario.kind),
        format!("init.amplitude={}", scenario.amplitude),
        format!("init.scale={}", scenario.scale),
        format!(
            "init.center={}",
            scenario
                .center
                .map_or("auto".to_string(), |p| fmt_points(&[p]))
        ),
        format!("init.seed={}", scenario.seed),
        format!("init.phase={}", scenario.phase),
        format!("diag.sample_dt={sample_dt}"),
        format!("diag.moments={}", fmt_list(&diagnostics.moments)),
        format!("diag.theta_centers={}", fmt_points(&diagnostics.centers)),
        format!("diag.theta_radius={}", diagnostics.theta_radius),
        format!("diag.ball_radii={}", fmt_list(&diagnostics.ball_radii)),
        format!("diag.e_pu_powers={}", fmt_list(&diagnostics.e_pu_powers)),
        format!("diag.classify_window={classify_window}"),
        format!("diag.stop_on_blowup={}", diagnostics.stop_on_blowup),
        format!("thresholds.eps0={eps0}"),
        format!("thresholds.eps1={}", diagnostics.eps1),
        format!("thresholds.eps2={eps2}"),
        format!("output.dir={}", output_dir.display()),
        format!("output.snapshot_every={snapshot_every}"),
    ];
    debug_assert_eq!(echo.len(), KEYS.len());

    Ok(RunConfig {
        grid,
        target,
        flow,
        scenario,
        diagnostics,
        sample_dt,
        classify_window,
        eps0,
        eps2,
        output_dir,
        snapshot_every,
        echo,
        warnings,
    })
}
