//! Command implementations behind the `evolve` binary.
//!
//! Every command reads a [`RunConfig`], writes its artifacts into an output
//! directory and reports an [`ExitCode`]: 0 on success, 2 when the numerics
//! did not converge or a check failed, 1 for configuration and input errors.

pub mod config;
mod json;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use evolve_core::applications::exact_heat_solution;
use evolve_core::continuation::{continuation_solve, default_schedule, ContinuationResult};
use evolve_core::energy::boundary_form_defect;
use evolve_core::trajectory::max_residual;
use evolve_core::{
    check_coercivity, check_monotonicity, energy, energy_balance_audit, energy_breakdown, energy_gradient,
    implicit_euler_solve, minimize, verify_equivalence, ConditionReport, EquivalenceReport, ProblemSpec, SolveResult,
    SolveStatus, Trajectory,
};
use serde::Serialize;

pub use config::{Method, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] evolve_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    InputError = 1,
    NotConverged = 2,
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::InputError
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Resolves the output directory: command line, then `EVOLVE_OUT_DIR`, then
/// the config, then `evolve-out`.
pub fn resolve_out_dir(cli: Option<&Path>, env: Option<&str>, cfg: &RunConfig) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("evolve-out"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(io_err(&path))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let path = dir.join(name);
    let text = json::to_string(value).map_err(|e| CliError::Config(format!("serializing {name}: {e}")))?;
    std::fs::write(&path, text).map_err(io_err(&path))
}

fn prepare_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemSummary {
    pub name: String,
    pub grid: String,
    pub boundary: String,
    pub q: f64,
    pub dim: usize,
    pub lambda: f64,
    pub t0: f64,
    pub t1: f64,
    pub m: usize,
}

impl ProblemSummary {
    fn new(p: &ProblemSpec, m: usize) -> Self {
        Self {
            name: p.meta.name.clone(),
            grid: p.meta.grid.clone(),
            boundary: p.meta.boundary.clone(),
            q: p.meta.q,
            dim: p.dim(),
            lambda: p.lambda(),
            t0: p.t0,
            t1: p.t1,
            m,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub problem: ProblemSummary,
    pub method: Method,
    pub seed: u64,
    #[serde(rename = "J_final")]
    pub j_final: Option<f64>,
    pub max_residual: Option<f64>,
    pub final_grad_norm: Option<f64>,
    pub iterations: usize,
    pub energy_balance_max: Option<f64>,
    pub boundary_form_defect: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub status: SolveStatus,
    pub message: Option<String>,
}

/// Result of one solve with any of the three methods.
pub struct Outcome {
    pub trajectory: Option<Trajectory>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub message: Option<String>,
    pub trace: Option<SolveResult>,
    pub continuation: Option<ContinuationResult>,
}

impl Outcome {
    fn failed(e: impl ToString) -> Self {
        Self {
            trajectory: None,
            status: SolveStatus::Error,
            iterations: 0,
            message: Some(e.to_string()),
            trace: None,
            continuation: None,
        }
    }
}

/// Solves `problem` with `m` steps by the configured method. Numerical
/// failures become [`SolveStatus::Error`]; only bad input is an `Err`.
pub fn run_method(cfg: &RunConfig, problem: &ProblemSpec, m: usize) -> CliResult<Outcome> {
    let s = &cfg.solver;
    match s.method {
        Method::Energy => {
            let init = Trajectory::constant_extension(problem, m)?;
            match minimize(problem, &init, &s.minimize_options()) {
                Ok(r) => Ok(Outcome {
                    trajectory: Some(r.trajectory.clone()),
                    status: r.status,
                    iterations: r.iterations,
                    message: r.message.clone(),
                    trace: Some(r),
                    continuation: None,
                }),
                Err(e) => Ok(Outcome::failed(e)),
            }
        }
        Method::Euler => match implicit_euler_solve(problem, m, &s.oracle_options()) {
            Ok(sol) => {
                let j = energy(problem, &sol.trajectory)?;
                let (status, message) = if j <= s.j_tol {
                    (SolveStatus::ConvergedZeroEnergy, None)
                } else {
                    (
                        SolveStatus::Error,
                        Some(format!("oracle trajectory has J = {j:e} above j_tol")),
                    )
                };
                Ok(Outcome {
                    iterations: sol.total_newton_iters(),
                    trajectory: Some(sol.trajectory),
                    status,
                    message,
                    trace: None,
                    continuation: None,
                })
            }
            Err(e) => Ok(Outcome::failed(e)),
        },
        Method::Continuation => {
            let schedule = default_schedule(s.eps0, s.eps_levels);
            let res = continuation_solve(problem, &problem.potential, &schedule, m, &s.oracle_options())?;
            let last = res.levels.last();
            let (status, message) = match (&res.failure, last) {
                (Some(e), _) => (SolveStatus::Error, Some(e.to_string())),
                (None, Some(l)) if res.converged() && l.final_j <= s.j_tol => (SolveStatus::ConvergedZeroEnergy, None),
                (None, _) if !res.converged() => (
                    SolveStatus::Error,
                    Some("continuation distances did not contract below the Cauchy tolerance".into()),
                ),
                (None, _) => (SolveStatus::Error, Some("final level energy above j_tol".into())),
            };
            Ok(Outcome {
                trajectory: last.map(|l| l.trajectory.clone()),
                status,
                iterations: res.levels.iter().map(|l| l.newton_iters_total).sum(),
                message,
                trace: None,
                continuation: Some(res),
            })
        }
    }
}

/// The problem whose energy certifies the continuation output: `ε_last·Ψ`.
fn certified_problem(cfg: &RunConfig, problem: &ProblemSpec, outcome: &Outcome) -> ProblemSpec {
    match (&cfg.solver.method, &outcome.continuation) {
        (Method::Continuation, Some(c)) => match c.levels.last() {
            Some(l) => problem
                .clone()
                .with_potential(problem.potential.scaled(l.eps))
                .with_lambda_flag(evolve_core::Lambda::One),
            None => problem.clone(),
        },
        _ => problem.clone(),
    }
}

fn grad_max(problem: &ProblemSpec, traj: &Trajectory) -> CliResult<f64> {
    Ok(energy_gradient(problem, traj)?
        .iter()
        .map(|g| g.amax())
        .fold(0.0, f64::max))
}

/// `solve`: trajectory.csv, convergence.csv, breakdown.csv, summary.json and,
/// for continuation, continuation.csv.
pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> CliResult<ExitCode> {
    let start = Instant::now();
    let problem = cfg.build_problem()?;
    let m = cfg.time.m;
    prepare_dir(out)?;
    let outcome = run_method(cfg, &problem, m)?;
    let cert = certified_problem(cfg, &problem, &outcome);

    let mut summary = Summary {
        problem: ProblemSummary::new(&problem, m),
        method: cfg.solver.method,
        seed: cfg.seed,
        j_final: None,
        max_residual: None,
        final_grad_norm: None,
        iterations: outcome.iterations,
        energy_balance_max: None,
        boundary_form_defect: None,
        runtime_ms: None,
        status: outcome.status,
        message: outcome.message.clone(),
    };

    if let Some(traj) = &outcome.trajectory {
        traj.write_csv(create(out, "trajectory.csv")?)?;
        let breakdown = energy_breakdown(&cert, traj)?;
        breakdown.write_csv(create(out, "breakdown.csv")?)?;
        let g = grad_max(&cert, traj)?;
        match &outcome.trace {
            Some(r) => r.write_trace_csv(create(out, "convergence.csv")?)?,
            None => write_single_row_trace(out, breakdown.total, g)?,
        }
        summary.j_final = Some(breakdown.total);
        summary.final_grad_norm = Some(g);
        summary.max_residual = Some(max_residual(&cert, traj)?);
        summary.energy_balance_max = Some(
            energy_balance_audit(&cert, traj)?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max),
        );
        summary.boundary_form_defect = Some(boundary_form_defect(&cert, traj)?);
    }
    if let Some(c) = &outcome.continuation {
        c.write_summary_csv(create(out, "continuation.csv")?)?;
    }
    if cfg.output.record_runtime {
        summary.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    write_json(out, "summary.json", &summary)?;
    Ok(if outcome.status.is_converged() {
        ExitCode::Success
    } else {
        ExitCode::NotConverged
    })
}

/// Trace with a single row for solvers that do not iterate on `J`.
fn write_single_row_trace(out: &Path, j: f64, g: f64) -> CliResult<()> {
    let f = evolve_core::trajectory::fmt_f64;
    let mut w = csv::Writer::from_writer(create(out, "convergence.csv")?);
    let err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(["iter", "J", "grad_norm", "step_size"]).map_err(err)?;
    w.write_record(["0".to_string(), f(j), f(g), f(0.0)]).map_err(err)?;
    w.flush().map_err(io_err(&out.join("convergence.csv")))
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub problem: ProblemSummary,
    pub oracle_m: usize,
    pub perturbation: f64,
    pub minimizer_status: SolveStatus,
    pub minimizer_iterations: usize,
    pub oracle_newton_iterations: usize,
    pub equivalence: EquivalenceReport,
    pub passed: bool,
}

/// `compare`: minimizer against the oracle; writes trajectory.csv,
/// oracle_trajectory.csv and compare.json.
pub fn cmd_compare(cfg: &RunConfig, out: &Path) -> CliResult<ExitCode> {
    let problem = cfg.build_problem()?;
    let m = cfg.time.m;
    let oracle_m = cfg.compare.oracle_m.unwrap_or(m);
    if oracle_m != m {
        return Err(CliError::Core(evolve_core::Error::GridMismatch(format!(
            "minimizer uses {m} steps, oracle {oracle_m}"
        ))));
    }
    prepare_dir(out)?;
    let oracle = match implicit_euler_solve(&problem, oracle_m, &cfg.solver.oracle_options()) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("oracle failed: {e}");
            return Ok(ExitCode::NotConverged);
        }
    };
    let init = Trajectory::constant_extension(&problem, m)?;
    let result = match minimize(&problem, &init, &cfg.solver.minimize_options()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("minimizer failed: {e}");
            return Ok(ExitCode::NotConverged);
        }
    };
    let mut traj = result.trajectory.clone();
    if cfg.compare.perturb != 0.0 {
        let mut free = traj.free_vector();
        let mid = (m.max(2) / 2 - 1) * problem.dim();
        free[mid] += cfg.compare.perturb;
        traj = traj.from_free_vector(&free)?;
    }
    let equivalence = verify_equivalence(&problem, &traj, &oracle.trajectory, &cfg.compare.tolerances())?;
    traj.write_csv(create(out, "trajectory.csv")?)?;
    oracle.trajectory.write_csv(create(out, "oracle_trajectory.csv")?)?;
    let passed = equivalence.passed;
    write_json(
        out,
        "compare.json",
        &CompareReport {
            problem: ProblemSummary::new(&problem, m),
            oracle_m,
            perturbation: cfg.compare.perturb,
            minimizer_status: result.status,
            minimizer_iterations: result.iterations,
            oracle_newton_iterations: oracle.total_newton_iters(),
            equivalence,
            passed,
        },
    )?;
    Ok(if passed {
        ExitCode::Success
    } else {
        ExitCode::NotConverged
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub problem: ProblemSummary,
    pub seed: u64,
    pub samples: usize,
    pub reports: Vec<ConditionReport>,
    pub passed: bool,
}

/// `check`: sampled growth, monotonicity and coercivity; writes check.json.
pub fn cmd_check(cfg: &RunConfig, out: &Path) -> CliResult<ExitCode> {
    let problem = cfg.build_problem()?;
    let c = &cfg.checks;
    prepare_dir(out)?;
    let mut reports = Vec::new();
    if c.growth {
        reports.push(problem.potential.check_growth(
            &problem.triple,
            (problem.t0, problem.t1),
            c.samples,
            c.growth_c0,
            problem.meta.q,
            cfg.seed,
        ));
    }
    if c.monotonicity {
        reports.push(check_monotonicity(&problem, problem.lambda_flag, c.samples, cfg.seed));
    }
    if c.coercivity {
        reports.push(check_coercivity(&problem, c.samples, cfg.seed));
    }
    let passed = reports.iter().all(ConditionReport::passed);
    write_json(
        out,
        "check.json",
        &CheckReport {
            problem: ProblemSummary::new(&problem, cfg.time.m),
            seed: cfg.seed,
            samples: c.samples,
            reports,
            passed,
        },
    )?;
    Ok(if passed {
        ExitCode::Success
    } else {
        ExitCode::NotConverged
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementLevel {
    pub level: usize,
    pub m: usize,
    pub dt: f64,
    pub status: SolveStatus,
    pub error: Option<f64>,
    pub energy_defect: Option<f64>,
    pub error_order: Option<f64>,
    pub defect_order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub problem: ProblemSummary,
    pub method: Method,
    /// `exact` for the heat equation, otherwise `oracle-refined` (implicit
    /// Euler at twice the finest step count).
    pub reference: String,
    pub levels: Vec<RefinementLevel>,
}

/// Max over common times and components of `|a − b|`, with `b` on a grid
/// `ratio` times finer.
fn coarse_distance(a: &Trajectory, b: &Trajectory, ratio: usize) -> f64 {
    (0..=a.steps())
        .map(|k| (a.state(k) - b.state(k * ratio)).amax())
        .fold(0.0, f64::max)
}

fn order(prev: Option<f64>, cur: Option<f64>) -> Option<f64> {
    match (prev, cur) {
        (Some(p), Some(c)) if p > 0.0 && c > 0.0 => Some((p / c).log2()),
        _ => None,
    }
}

/// `convergence`: solves at `m·2^i` steps for `i = 0..=refinements`; writes
/// convergence_table.csv and convergence.json.
pub fn cmd_convergence(cfg: &RunConfig, out: &Path, refinements: usize) -> CliResult<ExitCode> {
    if refinements > 12 {
        return Err(CliError::Config("at most 12 refinements".into()));
    }
    let problem = cfg.build_problem()?;
    let m0 = cfg.time.m;
    prepare_dir(out)?;
    let finest = m0 << refinements;
    let exact = cfg.problem.has_exact_heat().filter(|_| problem.t0 == 0.0);
    let (reference, ref_traj, ref_m) = match exact {
        Some(n) => ("exact", exact_heat_solution(n, finest, problem.t1)?, finest),
        None => match implicit_euler_solve(&problem, 2 * finest, &cfg.solver.oracle_options()) {
            Ok(sol) => ("oracle-refined", sol.trajectory, 2 * finest),
            Err(e) => {
                eprintln!("reference solve failed: {e}");
                return Ok(ExitCode::NotConverged);
            }
        },
    };
    let mut levels: Vec<RefinementLevel> = Vec::new();
    for i in 0..=refinements {
        let m = m0 << i;
        let outcome = run_method(cfg, &problem, m)?;
        let cert = certified_problem(cfg, &problem, &outcome);
        let (error, energy_defect) = match &outcome.trajectory {
            Some(t) => {
                let defect = energy_balance_audit(&cert, t)?
                    .into_iter()
                    .map(f64::abs)
                    .fold(0.0, f64::max);
                (Some(coarse_distance(t, &ref_traj, ref_m / m)), Some(defect))
            }
            None => (None, None),
        };
        let prev = levels.last();
        levels.push(RefinementLevel {
            level: i,
            m,
            dt: (problem.t1 - problem.t0) / m as f64,
            status: outcome.status,
            error_order: order(prev.and_then(|l| l.error), error),
            defect_order: order(prev.and_then(|l| l.energy_defect), energy_defect),
            error,
            energy_defect,
        });
    }
    write_table(out, &levels)?;
    let ok = levels.iter().all(|l| l.status.is_converged());
    write_json(
        out,
        "convergence.json",
        &ConvergenceReport {
            problem: ProblemSummary::new(&problem, m0),
            method: cfg.solver.method,
            reference: reference.into(),
            levels,
        },
    )?;
    Ok(if ok { ExitCode::Success } else { ExitCode::NotConverged })
}

fn write_table(out: &Path, levels: &[RefinementLevel]) -> CliResult<()> {
    let f = |v: Option<f64>| v.map(evolve_core::trajectory::fmt_f64).unwrap_or_default();
    let mut w = csv::Writer::from_writer(create(out, "convergence_table.csv")?);
    let err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record([
        "level",
        "m",
        "dt",
        "error",
        "energy_defect",
        "error_order",
        "defect_order",
    ])
    .map_err(err)?;
    for l in levels {
        w.write_record([
            l.level.to_string(),
            l.m.to_string(),
            evolve_core::trajectory::fmt_f64(l.dt),
            f(l.error),
            f(l.energy_defect),
            f(l.error_order),
            f(l.defect_order),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(io_err(&out.join("convergence_table.csv")))
}
