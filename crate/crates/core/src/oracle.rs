//! Implicit-Euler time stepping with a damped Newton solve per step.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::problem::ProblemSpec;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Target for the step residual `‖r_k‖∞`.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Pivots of the LU factorization below this are treated as singular.
    pub min_pivot: f64,
    /// When Newton stops making progress, accept the residual if it is below
    /// `floor_factor·tol·scale`, where `scale` is the largest term of the
    /// step equation (round-off floor).
    pub floor_factor: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            max_halvings: 30,
            min_pivot: 1e-13,
            floor_factor: 1e3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub trajectory: Trajectory,
    /// Newton iterations per step `k = 1..M`.
    pub newton_iters: Vec<usize>,
}

impl OracleSolution {
    pub fn total_newton_iters(&self) -> usize {
        self.newton_iters.iter().sum()
    }
}

struct StepSystem<'a> {
    problem: &'a ProblemSpec,
    i_prev: DVector<f64>,
    t: f64,
    dt: f64,
}

impl StepSystem<'_> {
    /// `r(u) = (I·u − I·u_prev)/dt + Λ_t(u) + DΨ_t(λu)` and its magnitude scale.
    fn residual(&self, u: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let p = self.problem;
        let lam = p.lambda();
        let di = (p.triple.apply_i(u) - &self.i_prev) / self.dt;
        let l = p.lambda_op.eval_lambda(self.t, u)?;
        let mut scale = di.amax().max(l.amax()).max(self.i_prev.amax() / self.dt);
        let mut r = di + l;
        if lam != 0.0 {
            let g = p.potential.grad_psi(self.t, &(u * lam))?;
            scale = scale.max(g.amax());
            r += g;
        }
        Ok((r, scale))
    }

    /// `I/dt + DΛ_t(u) + λ·D²Ψ_t(λu)`.
    fn jacobian(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p = self.problem;
        let lam = p.lambda();
        let mut jac = p.triple.inclusion() / self.dt + p.lambda_op.jacobian(self.t, u)?;
        if lam != 0.0 {
            jac += p.potential.hessian(self.t, &(u * lam))? * lam;
        }
        Ok(jac)
    }
}

/// Solves one implicit-Euler step from `u_prev` at time `t`, starting Newton
/// at `guess` (or `u_prev`). Returns the new state and the iteration count.
pub fn newton_solve_step(
    problem: &ProblemSpec,
    u_prev: &DVector<f64>,
    t: f64,
    dt: f64,
    guess: Option<&DVector<f64>>,
    opts: &OracleOptions,
) -> Result<(DVector<f64>, usize)> {
    check_len(problem.dim(), u_prev.len())?;
    if !(dt > 0.0) {
        return Err(Error::Input("time step must be positive".into()));
    }
    let sys = StepSystem {
        problem,
        i_prev: problem.triple.apply_i(u_prev),
        t,
        dt,
    };
    let mut u = guess.cloned().unwrap_or_else(|| u_prev.clone());
    check_len(problem.dim(), u.len())?;
    let (mut r, mut scale) = sys.residual(&u)?;
    let mut rn = r.amax();
    let mut iters = 0;
    // Round-off floor for stalled iterations, relative to the size of the terms.
    let floor = |scale: f64| opts.floor_factor * opts.tol * scale.max(1.0);
    while rn > opts.tol {
        if iters == opts.max_iter {
            if rn <= floor(scale) {
                break;
            }
            return Err(Error::StepFailure {
                step: 0,
                residual: rn,
                reason: "iteration limit",
            });
        }
        iters += 1;
        let lu = sys.jacobian(&u)?.lu();
        let u_diag = lu.u().diagonal();
        if u_diag.iter().any(|p| p.abs() < opts.min_pivot || !p.is_finite()) {
            return Err(Error::StepFailure {
                step: 0,
                residual: rn,
                reason: "singular Jacobian",
            });
        }
        let delta = lu.solve(&(-&r)).ok_or(Error::StepFailure {
            step: 0,
            residual: rn,
            reason: "singular Jacobian",
        })?;
        let mut alpha = 1.0;
        let mut accepted = false;
        let before = rn;
        for _ in 0..=opts.max_halvings {
            let trial = &u + &delta * alpha;
            if let Ok((tr, ts)) = sys.residual(&trial) {
                let tn = tr.amax();
                if tn.is_finite() && tn < rn {
                    u = trial;
                    r = tr;
                    rn = tn;
                    scale = ts;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        let stalled = !accepted || rn > 0.5 * before;
        if stalled && rn <= floor(scale) {
            break;
        }
        if !accepted {
            return Err(Error::StepFailure {
                step: 0,
                residual: rn,
                reason: "line search stagnated",
            });
        }
    }
    Ok((u, iters))
}

fn tag_step(e: Error, k: usize) -> Error {
    match e {
        Error::StepFailure { residual, reason, .. } => Error::StepFailure {
            step: k,
            residual,
            reason,
        },
        other => other.at_step(k),
    }
}

/// Implicit Euler with `m` uniform steps over the problem horizon.
pub fn implicit_euler_solve(problem: &ProblemSpec, m: usize, opts: &OracleOptions) -> Result<OracleSolution> {
    implicit_euler_solve_warm(problem, m, opts, None)
}

/// As [`implicit_euler_solve`], with Newton at step `k` started from
/// `warm.state(k)` when a warm trajectory is given.
pub fn implicit_euler_solve_warm(
    problem: &ProblemSpec,
    m: usize,
    opts: &OracleOptions,
    warm: Option<&Trajectory>,
) -> Result<OracleSolution> {
    if m == 0 {
        return Err(Error::Input("number of steps must be at least 1".into()));
    }
    let template = Trajectory::constant_extension(problem, m)?;
    if let Some(w) = warm {
        template.check_same_grid(w)?;
    }
    let dt = template.dt();
    let mut states = Vec::with_capacity(m + 1);
    states.push(template.state(0).clone());
    let mut iters = Vec::with_capacity(m);
    for k in 1..=m {
        let guess = warm.map(|w| w.state(k));
        let (u, it) = newton_solve_step(problem, &states[k - 1], template.time(k), dt, guess, opts)
            .map_err(|e| tag_step(e, k))?;
        states.push(u);
        iters.push(it);
    }
    Ok(OracleSolution {
        trajectory: template.with_free_states(states.split_off(1))?,
        newton_iters: iters,
    })
}
