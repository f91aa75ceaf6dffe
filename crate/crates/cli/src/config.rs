//! TOML run configuration.

use std::path::{Path, PathBuf};

use evolve_core::applications::{
    anti_coercive, build_heat, build_hyperbolic, build_navier_stokes_2d, build_parabolic_divergence,
    build_parabolic_nondivergence, build_schrodinger, quartic_regularizer, regularized_heat_core, scalar_decay,
    DivergenceCoefficients, HyperbolicCoefficients, NondivergenceCoefficients, NsForcing, NsInitial,
    SchrodingerCouplings,
};
use evolve_core::{EquivalenceTolerances, Lambda, MinimizeOptions, OracleOptions, ProblemSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_n() -> usize {
    32
}

fn default_q() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    Heat {
        #[serde(default = "default_n")]
        n: usize,
    },
    ParabolicDivergence {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_q")]
        q: f64,
        #[serde(default)]
        coefficients: DivergenceCoefficients,
    },
    ParabolicNondivergence {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_q")]
        q: f64,
        #[serde(default)]
        coefficients: NondivergenceCoefficients,
    },
    Hyperbolic {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default)]
        coefficients: HyperbolicCoefficients,
    },
    Schrodinger {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default)]
        couplings: SchrodingerCouplings,
    },
    NavierStokes {
        #[serde(default = "default_k")]
        k: usize,
        nu: f64,
        #[serde(default = "default_forcing")]
        forcing: NsForcing,
        #[serde(default = "default_initial")]
        initial: NsInitial,
    },
    ScalarDecay,
    AntiCoercive,
    /// Heat operator with the quartic regularizer as its potential and `λ = 1`.
    RegularizedHeat {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
}

fn default_k() -> usize {
    16
}

fn default_forcing() -> NsForcing {
    NsForcing::None
}

fn default_initial() -> NsInitial {
    NsInitial::TaylorGreen { amplitude: 1.0 }
}

fn default_amplitude() -> f64 {
    0.1
}

impl ProblemConfig {
    pub fn build(&self) -> Result<ProblemSpec, CliError> {
        let p = match self {
            ProblemConfig::Heat { n } => build_heat(*n)?,
            ProblemConfig::ParabolicDivergence { n, q, coefficients } => {
                build_parabolic_divergence(*n, *q, *coefficients)?
            }
            ProblemConfig::ParabolicNondivergence { n, q, coefficients } => {
                build_parabolic_nondivergence(*n, *q, *coefficients)?
            }
            ProblemConfig::Hyperbolic { n, coefficients } => build_hyperbolic(*n, *coefficients)?,
            ProblemConfig::Schrodinger { n, couplings } => build_schrodinger(*n, *couplings)?,
            ProblemConfig::NavierStokes {
                k,
                nu,
                forcing,
                initial,
            } => build_navier_stokes_2d(*k, *nu, forcing, initial)?.problem,
            ProblemConfig::ScalarDecay => scalar_decay(),
            ProblemConfig::AntiCoercive => anti_coercive(),
            ProblemConfig::RegularizedHeat { n, amplitude } => regularized_heat_core(*n, *amplitude)?
                .with_potential(quartic_regularizer(*n)?)
                .with_lambda_flag(Lambda::One),
        };
        Ok(p)
    }

    /// Whether the exact solution `e^{−π²t}·sin(πx)` is available.
    pub fn has_exact_heat(&self) -> Option<usize> {
        match self {
            ProblemConfig::Heat { n } => Some(*n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Overrides the builder horizon when both ends are given.
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    #[serde(default = "default_m")]
    pub m: usize,
}

fn default_m() -> usize {
    50
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t0: None,
            t1: None,
            m: default_m(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Minimize the global-in-time energy.
    Energy,
    /// Implicit Euler with Newton.
    Euler,
    /// ε-continuation on the potential, oracle at every level.
    Continuation,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_j_tol")]
    pub j_tol: f64,
    #[serde(default = "default_g_tol")]
    pub g_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_history")]
    pub history: usize,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    #[serde(default = "default_eps_levels")]
    pub eps_levels: usize,
}

fn default_method() -> Method {
    Method::Energy
}
fn default_j_tol() -> f64 {
    1e-10
}
fn default_g_tol() -> f64 {
    1e-9
}
fn default_max_iter() -> usize {
    100_000
}
fn default_history() -> usize {
    10
}
fn default_newton_tol() -> f64 {
    1e-12
}
fn default_newton_max_iter() -> usize {
    50
}
fn default_eps0() -> f64 {
    1.0
}
fn default_eps_levels() -> usize {
    12
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: default_method(),
            j_tol: default_j_tol(),
            g_tol: default_g_tol(),
            max_iter: default_max_iter(),
            history: default_history(),
            newton_tol: default_newton_tol(),
            newton_max_iter: default_newton_max_iter(),
            eps0: default_eps0(),
            eps_levels: default_eps_levels(),
        }
    }
}

impl SolverConfig {
    pub fn minimize_options(&self) -> MinimizeOptions {
        MinimizeOptions {
            j_tol: self.j_tol,
            g_tol: self.g_tol,
            max_iter: self.max_iter,
            history: self.history,
            ..MinimizeOptions::default()
        }
    }

    pub fn oracle_options(&self) -> OracleOptions {
        OracleOptions {
            tol: self.newton_tol,
            max_iter: self.newton_max_iter,
            ..OracleOptions::default()
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default = "yes")]
    pub growth: bool,
    #[serde(default = "yes")]
    pub monotonicity: bool,
    #[serde(default = "yes")]
    pub coercivity: bool,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Growth constant `C0`; `q` comes from the problem.
    #[serde(default = "default_c0")]
    pub growth_c0: f64,
}

fn yes() -> bool {
    true
}
fn default_samples() -> usize {
    1000
}
fn default_c0() -> f64 {
    2.0
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            growth: true,
            monotonicity: true,
            coercivity: true,
            samples: default_samples(),
            growth_c0: default_c0(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Step count for the oracle; defaults to `time.m`.
    pub oracle_m: Option<usize>,
    /// Added to the first component of the minimizer's midpoint state before
    /// verification.
    #[serde(default)]
    pub perturb: f64,
    pub j_tol: Option<f64>,
    pub grad_tol: Option<f64>,
    pub state_tol: Option<f64>,
    pub residual_tol: Option<f64>,
}

impl CompareConfig {
    pub fn tolerances(&self) -> EquivalenceTolerances {
        let d = EquivalenceTolerances::default();
        EquivalenceTolerances {
            j_tol: self.j_tol.unwrap_or(d.j_tol),
            grad_tol: self.grad_tol.unwrap_or(d.grad_tol),
            state_tol: self.state_tol.unwrap_or(d.state_tol),
            residual_tol: self.residual_tol.unwrap_or(d.residual_tol),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Record wall-clock time in summaries. Off by default so that repeated
    /// runs produce identical files.
    #[serde(default)]
    pub record_runtime: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.time.m == 0 {
            return Err(CliError::Config("time.m must be at least 1".into()));
        }
        if self.time.t0.is_some() != self.time.t1.is_some() {
            return Err(CliError::Config("time.t0 and time.t1 must be given together".into()));
        }
        if self.solver.eps_levels == 0 || self.solver.eps0.is_nan() || self.solver.eps0 <= 0.0 {
            return Err(CliError::Config(
                "continuation needs eps0 > 0 and at least one level".into(),
            ));
        }
        if !self.compare.perturb.is_finite() {
            return Err(CliError::Config("compare.perturb must be finite".into()));
        }
        Ok(())
    }

    /// Builds the problem and applies the horizon override.
    pub fn build_problem(&self) -> Result<ProblemSpec, CliError> {
        let p = self.problem.build()?;
        match (self.time.t0, self.time.t1) {
            (Some(t0), Some(t1)) => Ok(p.with_horizon(t0, t1)?),
            _ => Ok(p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_toml("[problem]\nkind = \"heat\"\n").unwrap();
        assert_eq!(cfg.time.m, 50);
        assert_eq!(cfg.solver.method, Method::Energy);
        assert_eq!(cfg.build_problem().unwrap().dim(), 32);
    }

    #[test]
    fn nested_coefficients() {
        let text = r#"
            [problem]
            kind = "parabolic_divergence"
            n = 8
            q = 4.0
            coefficients.theta = { kind = "tanh", amp = 0.5 }
        "#;
        let cfg = RunConfig::from_toml(text).unwrap();
        let p = cfg.build_problem().unwrap();
        assert_eq!(p.meta.q, 4.0);
    }

    #[test]
    fn unknown_field_is_config_error() {
        let err = RunConfig::from_toml("[problem]\nkind = \"heat\"\n[time]\nsteps = 3\n").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn half_horizon_is_rejected() {
        let err = RunConfig::from_toml("[problem]\nkind = \"heat\"\n[time]\nt1 = 1.0\n").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }
}
