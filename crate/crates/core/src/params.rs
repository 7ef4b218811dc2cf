use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Explicit,
    Imex,
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "explicit" => Ok(Scheme::Explicit),
            "imex" => Ok(Scheme::Imex),
            other => Err(format!(
                "unknown scheme `{other}` (expected explicit or imex)"
            )),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Explicit => "explicit",
            Scheme::Imex => "imex",
        })
    }
}

/// Linear-solver settings for the semi-implicit map update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImexSettings {
    /// Upper bound on the time step; `None` means `0.1·h`.
    pub dt_cap: Option<f64>,
    /// Relative residual reduction required of the conjugate-gradient solve.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ImexSettings {
    fn default() -> Self {
        Self {
            dt_cap: None,
            tol: 1e-10,
            max_iter: 2000,
        }
    }
}

/// Constants of the coupled flow `f_t = v⁻¹ τ(f)`, `v_t = 2b|df|² − 2a v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowParams {
    /// Volume damping.
    pub a: f64,
    /// Conformal response.
    pub b: f64,
    /// Bound on the second fundamental form of the target and its derivatives.
    pub c_n: f64,
    pub scheme: Scheme,
    pub cfl: f64,
    pub t_end: f64,
    pub imex: ImexSettings,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 4.0,
            c_n: 1.0,
            scheme: Scheme::Explicit,
            cfl: 0.25,
            t_end: 1.0,
            imex: ImexSettings::default(),
        }
    }
}

impl FlowParams {
    /// Plain harmonic map flow: `a = b = 0`, so `v ≡ 1`.
    pub fn harmonic_map_flow() -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0) || !(self.b >= 0.0) {
            return Err(invalid(format!(
                "a and b must be nonnegative, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if !(self.c_n >= 0.0) {
            return Err(invalid("c_n must be nonnegative"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(invalid(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(invalid(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if !(self.imex.tol > 0.0) || self.imex.max_iter == 0 {
            return Err(invalid("imex tolerance and iteration cap must be positive"));
        }
        if let Some(cap) = self.imex.dt_cap {
            if !(cap > 0.0) {
                return Err(invalid("imex dt cap must be positive"));
            }
        }
        Ok(())
    }

    /// `b > 2·C_N² + C_N`.
    pub fn standing_assumption_holds(&self) -> bool {
        self.b > 2.0 * self.c_n * self.c_n + self.c_n
    }

    /// `C₄(p) = 2b(p+1) − (p+2)C_N − 2(p+2)C_N²`.
    pub fn c4(&self, p: f64) -> f64 {
        2.0 * self.b * (p + 1.0) - (p + 2.0) * self.c_n - 2.0 * (p + 2.0) * self.c_n * self.c_n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_c4_at_zero_is_two() {
        let p = FlowParams::default();
        assert_eq!(p.c4(0.0), 2.0);
        assert!(p.standing_assumption_holds());
    }

    #[test]
    fn harmonic_map_flow_violates_standing_assumption() {
        let p = FlowParams::harmonic_map_flow();
        assert!(p.validate().is_ok());
        assert!(!p.standing_assumption_holds());
        assert!(p.c4(0.0) < 0.0);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = [
            FlowParams {
                a: -1.0,
                ..Default::default()
            },
            FlowParams {
                cfl: 0.0,
                ..Default::default()
            },
            FlowParams {
                cfl: 1.5,
                ..Default::default()
            },
            FlowParams {
                t_end: 0.0,
                ..Default::default()
            },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    proptest! {
        #[test]
        fn c4_positive_whenever_standing_assumption_holds(
            c_n in 0.0f64..3.0, extra in 1e-6f64..10.0, p in 0.0f64..50.0
        ) {
            let b = 2.0 * c_n * c_n + c_n + extra;
            let params = FlowParams { b, c_n, ..Default::default() };
            prop_assert!(params.standing_assumption_holds());
            prop_assert!(params.c4(p) > 0.0);
        }
    }
}
