//! Minimization of the discrete energy over the free states `u_1..u_M`.

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::DVector;
use serde::Serialize;

use crate::energy::energy_and_gradient;
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::trajectory::{fmt_f64, max_residual, Trajectory};

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    /// Converged when `J ≤ j_tol` and `‖g‖∞ ≤ g_tol`.
    pub j_tol: f64,
    pub g_tol: f64,
    pub max_iter: usize,
    pub history: usize,
    pub armijo_c1: f64,
    pub max_halvings: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            j_tol: 1e-10,
            g_tol: 1e-9,
            max_iter: 100_000,
            history: 10,
            armijo_c1: 1e-4,
            max_halvings: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    ConvergedZeroEnergy,
    ConvergedStationaryPositiveJ,
    IterationCap,
    Error,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        self == SolveStatus::ConvergedZeroEnergy
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::ConvergedZeroEnergy => "converged-zero-energy",
            SolveStatus::ConvergedStationaryPositiveJ => "converged-stationary-positive-J",
            SolveStatus::IterationCap => "iteration-cap",
            SolveStatus::Error => "error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub trajectory: Trajectory,
    /// `J` at the initial guess and after every accepted step.
    pub j_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    /// Accepted step length per entry (0 for the initial guess).
    pub step_history: Vec<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Diagnostics for non-converged runs.
    pub message: Option<String>,
}

impl SolveResult {
    pub fn final_j(&self) -> f64 {
        *self.j_history.last().unwrap_or(&f64::NAN)
    }

    pub fn final_grad_norm(&self) -> f64 {
        *self.grad_norm_history.last().unwrap_or(&f64::NAN)
    }

    /// CSV with header `iter,J,grad_norm,step_size`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Input(format!("csv: {e}"));
        w.write_record(["iter", "J", "grad_norm", "step_size"]).map_err(io)?;
        for i in 0..self.j_history.len() {
            w.write_record([
                i.to_string(),
                fmt_f64(self.j_history[i]),
                fmt_f64(self.grad_norm_history[i]),
                fmt_f64(self.step_history[i]),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Input(e.to_string()))?;
        Ok(())
    }
}

fn flatten(g: &[DVector<f64>]) -> DVector<f64> {
    let n = g.first().map_or(0, |v| v.len());
    DVector::from_fn(n * g.len(), |i, _| g[i / n][i % n])
}

struct Objective<'a> {
    problem: &'a ProblemSpec,
    template: &'a Trajectory,
}

impl Objective<'_> {
    fn eval(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let traj = self.template.from_free_vector(x)?;
        let (j, g) = energy_and_gradient(self.problem, &traj)?;
        Ok((j, flatten(&g)))
    }
}

/// L-BFGS with Armijo backtracking; steepest descent when the quasi-Newton
/// direction fails.
///
/// A stationary point with `J > j_tol` is reported as
/// [`SolveStatus::ConvergedStationaryPositiveJ`], never as a solution.
pub fn minimize(problem: &ProblemSpec, init: &Trajectory, opts: &MinimizeOptions) -> Result<SolveResult> {
    let reference = Trajectory::constant_extension(problem, init.steps())?;
    reference.check_same_grid(init)?;
    let obj = Objective {
        problem,
        template: init,
    };
    let mut x = init.free_vector();
    let (mut j, mut g) = obj.eval(&x)?;
    let mut res = SolveResult {
        trajectory: init.clone(),
        j_history: vec![j],
        grad_norm_history: vec![g.amax()],
        step_history: vec![0.0],
        iterations: 0,
        status: SolveStatus::IterationCap,
        message: None,
    };
    let mut memory: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::with_capacity(opts.history);

    loop {
        let gn = g.amax();
        if gn <= opts.g_tol {
            res.status = if j <= opts.j_tol {
                SolveStatus::ConvergedZeroEnergy
            } else {
                res.message = Some(format!(
                    "stationary point with J = {j:.3e} > 0: run the monotonicity and coercivity checks"
                ));
                SolveStatus::ConvergedStationaryPositiveJ
            };
            break;
        }
        if res.iterations >= opts.max_iter {
            res.status = SolveStatus::IterationCap;
            res.message = Some(format!(
                "iteration cap {} reached (J = {j:.3e}, |g| = {gn:.3e})",
                opts.max_iter
            ));
            break;
        }

        let mut dir = two_loop(&g, &memory);
        if memory.is_empty() {
            dir *= 1.0 / gn.max(1.0);
        }
        let mut step = line_search(&obj, &x, j, &g, &dir, opts)?;
        if step.is_none() && !memory.is_empty() {
            memory.clear();
            dir = -&g / gn.max(1.0);
            step = line_search(&obj, &x, j, &g, &dir, opts)?;
        }
        let Some((alpha, x_new, j_new, g_new)) = step else {
            res.status = SolveStatus::Error;
            res.message = Some(format!(
                "line search failed after {} halvings (J = {j:.3e}, |g| = {gn:.3e})",
                opts.max_halvings
            ));
            break;
        };

        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            if memory.len() == opts.history {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        j = j_new;
        g = g_new;
        res.iterations += 1;
        res.j_history.push(j);
        res.grad_norm_history.push(g.amax());
        res.step_history.push(alpha);
    }
    res.trajectory = init.from_free_vector(&x)?;
    Ok(res)
}

fn two_loop(g: &DVector<f64>, memory: &VecDeque<(DVector<f64>, DVector<f64>, f64)>) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * s.dot(&q);
        q.axpy(-a, y, 1.0);
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q.axpy(a - b, s, 1.0);
    }
    -q
}

type Accepted = (f64, DVector<f64>, f64, DVector<f64>);

fn line_search(
    obj: &Objective,
    x: &DVector<f64>,
    j: f64,
    g: &DVector<f64>,
    dir: &DVector<f64>,
    opts: &MinimizeOptions,
) -> Result<Option<Accepted>> {
    let slope = g.dot(dir);
    if !(slope < 0.0) {
        return Ok(None);
    }
    let mut alpha = 1.0;
    for _ in 0..=opts.max_halvings {
        let trial = x + dir * alpha;
        match obj.eval(&trial) {
            Ok((jt, gt)) if jt.is_finite() && jt <= j + opts.armijo_c1 * alpha * slope => {
                return Ok(Some((alpha, trial, jt, gt)));
            }
            // Blow-up states and failed conjugates shrink the step.
            Ok(_)
            | Err(Error::OperatorEval { .. })
            | Err(Error::ConjugateFailure { .. })
            | Err(Error::NonFinite(_)) => {}
            Err(Error::AtStep { source, .. })
                if matches!(*source, Error::ConjugateFailure { .. } | Error::NonFinite(_)) => {}
            Err(e) => return Err(e),
        }
        alpha *= 0.5;
    }
    Ok(None)
}

/// Tolerances for [`verify_equivalence`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EquivalenceTolerances {
    pub j_tol: f64,
    pub grad_tol: f64,
    pub state_tol: f64,
    pub residual_tol: f64,
}

impl Default for EquivalenceTolerances {
    fn default() -> Self {
        Self {
            j_tol: 1e-10,
            grad_tol: 1e-8,
            state_tol: 1e-5,
            residual_tol: 1e-6,
        }
    }
}

/// Checks that zero energy, stationarity, the discrete equation and agreement
/// with the oracle all hold together.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub j_result: f64,
    pub j_oracle: f64,
    pub max_discrepancy: f64,
    pub grad_norm_result: f64,
    pub grad_norm_oracle: f64,
    pub max_residual_result: f64,
    pub max_residual_oracle: f64,
    pub zero_energy: bool,
    pub critical_point: bool,
    pub solves_equation: bool,
    pub matches_oracle: bool,
    pub passed: bool,
    pub tolerances: EquivalenceTolerances,
}

pub fn verify_equivalence(
    problem: &ProblemSpec,
    result: &Trajectory,
    oracle: &Trajectory,
    tol: &EquivalenceTolerances,
) -> Result<EquivalenceReport> {
    result.check_same_grid(oracle)?;
    let (j_result, g_result) = energy_and_gradient(problem, result)?;
    let (j_oracle, g_oracle) = energy_and_gradient(problem, oracle)?;
    let gmax = |g: &[DVector<f64>]| g.iter().map(|v| v.amax()).fold(0.0, f64::max);
    let grad_norm_result = gmax(&g_result);
    let grad_norm_oracle = gmax(&g_oracle);
    let max_residual_result = max_residual(problem, result)?;
    let max_residual_oracle = max_residual(problem, oracle)?;
    let max_discrepancy = result.max_distance(oracle)?;
    let zero_energy = j_result <= tol.j_tol && j_oracle <= tol.j_tol;
    let critical_point = grad_norm_result <= tol.grad_tol && grad_norm_oracle <= tol.grad_tol;
    let solves_equation = max_residual_result <= tol.residual_tol && max_residual_oracle <= tol.residual_tol;
    let matches_oracle = max_discrepancy <= tol.state_tol;
    Ok(EquivalenceReport {
        j_result,
        j_oracle,
        max_discrepancy,
        grad_norm_result,
        grad_norm_oracle,
        max_residual_result,
        max_residual_oracle,
        zero_energy,
        critical_point,
        solves_equation,
        matches_oracle,
        passed: zero_energy && critical_point && solves_equation && matches_oracle,
        tolerances: *tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{OperatorKind, OperatorLambda};
    use crate::potential::Potential;
    use crate::problem::{Lambda, ProblemMeta};
    use crate::triple::EvolutionTriple;
    use nalgebra::DMatrix;

    fn s(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    fn decay() -> ProblemSpec {
        ProblemSpec::new(
            EvolutionTriple::identity(1),
            Potential::quadratic(DMatrix::from_element(1, 1, 1.0)).unwrap(),
            OperatorLambda::linear(DMatrix::from_element(1, 1, 1.0), OperatorKind::Linear),
            Lambda::One,
            (0.0, 1.0),
            s(1.0),
            ProblemMeta {
                name: "decay".into(),
                grid: "1".into(),
                boundary: "none".into(),
                q: 2.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn scalar_decay_from_zero() {
        let p = decay();
        let init = Trajectory::new(&p.triple, vec![s(1.0), s(0.0)], 0.0, 1.0, s(1.0)).unwrap();
        let r = minimize(&p, &init, &MinimizeOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::ConvergedZeroEnergy);
        assert!((r.trajectory.state(1)[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!(r.final_j() < 1e-12);
    }

    #[test]
    fn solved_init_needs_no_iterations() {
        let p = decay();
        let init = Trajectory::new(&p.triple, vec![s(1.0), s(1.0 / 3.0)], 0.0, 1.0, s(1.0)).unwrap();
        let r = minimize(&p, &init, &MinimizeOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::ConvergedZeroEnergy);
        assert!(r.iterations <= 1);
    }

    #[test]
    fn history_is_monotone_and_trace_has_header() {
        let p = decay();
        let init = Trajectory::constant_extension(&p, 8).unwrap();
        let r = minimize(&p, &init, &MinimizeOptions::default()).unwrap();
        for w in r.j_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let mut buf = Vec::new();
        r.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,J,grad_norm,step_size\n0,"));
        assert_eq!(text.lines().count(), r.j_history.len() + 1);
    }

    #[test]
    fn iteration_cap_status() {
        let p = decay();
        let init = Trajectory::constant_extension(&p, 8).unwrap();
        let opts = MinimizeOptions {
            max_iter: 1,
            ..Default::default()
        };
        let r = minimize(&p, &init, &opts).unwrap();
        assert_eq!(r.status, SolveStatus::IterationCap);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn equivalence_rejects_grid_mismatch() {
        let p = decay();
        let a = Trajectory::constant_extension(&p, 4).unwrap();
        let b = Trajectory::constant_extension(&p, 5).unwrap();
        assert!(matches!(
            verify_equivalence(&p, &a, &b, &EquivalenceTolerances::default()),
            Err(Error::GridMismatch(_))
        ));
    }
}
