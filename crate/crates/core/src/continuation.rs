//! ε-continuation: solve `d/dt(I·u) + Λ_t(u) + ε·DΨ_t(u) = 0` for a
//! decreasing schedule of ε, warm-starting each level from the previous one.

use std::io::Write;

use serde::Serialize;

use crate::energy::{accumulate_balance, energy};
use crate::error::{Error, Result};
use crate::oracle::{implicit_euler_solve_warm, OracleOptions};
use crate::potential::Potential;
use crate::problem::{Lambda, ProblemSpec};
use crate::trajectory::{fmt_f64, Trajectory};

/// Successive distances below this count as Cauchy evidence of convergence.
pub const CAUCHY_TOL: f64 = 1e-7;

/// `ε_i = eps0·2^{−i}` for `i < levels`.
pub fn default_schedule(eps0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|i| eps0 * 0.5f64.powi(i as i32)).collect()
}

#[derive(Debug, Clone)]
pub struct ContinuationLevel {
    pub eps: f64,
    pub trajectory: Trajectory,
    /// `max_k ‖u_k^{(i)} − u_k^{(i−1)}‖∞`; `None` on the first level.
    pub distance_to_prev: Option<f64>,
    /// Energy of the level's own regularized problem.
    pub final_j: f64,
    pub newton_iters_total: usize,
}

#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub levels: Vec<ContinuationLevel>,
    /// Set when a level failed; `levels` then holds the completed ones.
    pub failure: Option<Error>,
}

impl ContinuationResult {
    pub fn distances(&self) -> Vec<f64> {
        self.levels.iter().filter_map(|l| l.distance_to_prev).collect()
    }

    /// Distances strictly decrease and the last one is below [`CAUCHY_TOL`].
    pub fn converged(&self) -> bool {
        let d = self.distances();
        self.failure.is_none()
            && !d.is_empty()
            && d.windows(2).all(|w| w[1] < w[0])
            && d.last().is_some_and(|&v| v < CAUCHY_TOL)
    }

    /// CSV with header `eps,distance_to_prev,final_J,newton_iters_total`.
    /// The first level has an empty distance field.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Input(format!("csv: {e}"));
        w.write_record(["eps", "distance_to_prev", "final_J", "newton_iters_total"])
            .map_err(io)?;
        for l in &self.levels {
            w.write_record([
                fmt_f64(l.eps),
                l.distance_to_prev.map(fmt_f64).unwrap_or_default(),
                fmt_f64(l.final_j),
                l.newton_iters_total.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Input(e.to_string()))?;
        Ok(())
    }
}

/// Runs the oracle on `core` with potential `ε_i·reg` and `λ = 1` for each
/// level. The potential of `core` itself is ignored.
pub fn continuation_solve(
    core: &ProblemSpec,
    reg: &Potential,
    schedule: &[f64],
    m: usize,
    opts: &OracleOptions,
) -> Result<ContinuationResult> {
    if schedule.is_empty() {
        return Err(Error::Input("empty eps schedule".into()));
    }
    if schedule.iter().any(|&e| !(e > 0.0)) || schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Input(
            "eps schedule must be positive and strictly decreasing".into(),
        ));
    }
    let mut levels: Vec<ContinuationLevel> = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let problem = core
            .clone()
            .with_potential(reg.scaled(eps))
            .with_lambda_flag(Lambda::One);
        let warm = levels.last().map(|l| &l.trajectory);
        let sol = match implicit_euler_solve_warm(&problem, m, opts, warm) {
            Ok(s) => s,
            Err(e) => {
                return Ok(ContinuationResult {
                    levels,
                    failure: Some(e),
                })
            }
        };
        let distance_to_prev = match warm {
            Some(w) => Some(sol.trajectory.max_distance(w)?),
            None => None,
        };
        let final_j = energy(&problem, &sol.trajectory)?;
        levels.push(ContinuationLevel {
            eps,
            newton_iters_total: sol.total_newton_iters(),
            trajectory: sol.trajectory,
            distance_to_prev,
            final_j,
        });
    }
    Ok(ContinuationResult { levels, failure: None })
}

/// Per-time values of the limiting energy inequality.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyInequalityReport {
    /// `s(t_m)` for `m = 0..M`.
    pub values: Vec<f64>,
    pub max_value: f64,
    pub pass_tol: f64,
    pub passed: bool,
}

/// `s(t_m) = ½‖T·u_m‖²_H + dt·Σ_{k≤m} ⟨u_k, Λ_{t_k}(u_k)⟩ − ½‖w0‖²_H`;
/// passes iff `s(t_m) ≤ pass_tol` for every `m`.
pub fn energy_inequality_check(
    problem: &ProblemSpec,
    traj: &Trajectory,
    pass_tol: f64,
) -> Result<EnergyInequalityReport> {
    let flux: Vec<f64> = (1..=traj.steps())
        .map(|k| {
            let u = traj.state(k);
            problem
                .lambda_op
                .eval_lambda(traj.time(k), u)
                .map(|l| u.dot(&l))
                .map_err(|e| e.at_step(k))
        })
        .collect::<Result<_>>()?;
    let values = accumulate_balance(problem, traj, &flux)?;
    let max_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(EnergyInequalityReport {
        passed: max_value <= pass_tol,
        values,
        max_value,
        pass_tol,
    })
}
