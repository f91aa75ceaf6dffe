//! The discrete variational energy and its exact gradient.
//!
//! Per step `k` with `y_k = −(D_k + Λ_{t_k}(u_k))` the density is the duality
//! gap `Ψ_{t_k}(λu_k) + Ψ*_{t_k}(y_k) − ⟨λu_k, y_k⟩`, and
//! `J = dt·Σ_k gap_k`. It vanishes exactly on implicit-Euler solutions.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::problem::ProblemSpec;
use crate::trajectory::{fmt_f64, Trajectory};

struct StepEval {
    gap: f64,
    /// `y_k`
    y: DVector<f64>,
    /// `z_k = DΨ*_{t_k}(y_k)`
    z: DVector<f64>,
}

fn eval_steps(problem: &ProblemSpec, traj: &Trajectory) -> Result<Vec<StepEval>> {
    check_len(problem.dim(), traj.dim())?;
    let d = traj.time_derivative(&problem.triple)?;
    let lam = problem.lambda();
    (1..=traj.steps())
        .into_par_iter()
        .map(|k| {
            let t = traj.time(k);
            let u = traj.state(k);
            let step = || -> Result<StepEval> {
                let y = -(&d[k - 1] + problem.lambda_op.eval_lambda(t, u)?);
                let (gap, z) = problem.potential.gap_with_argmax(t, &(u * lam), &y)?;
                Ok(StepEval { gap, y, z })
            };
            step().map_err(|e| e.at_step(k))
        })
        .collect()
}

/// `J = dt·Σ_{k=1..M} gap_k`. The sum runs in step order so the value does
/// not depend on the worker count.
pub fn energy(problem: &ProblemSpec, traj: &Trajectory) -> Result<f64> {
    let steps = eval_steps(problem, traj)?;
    Ok(traj.dt() * steps.iter().map(|s| s.gap).sum::<f64>())
}

/// `J` together with `∂J/∂u_1..∂J/∂u_M`.
///
/// With `d_j = λu_j − z_j` the gradient is
/// `g_j = dt·λ(DΨ(λu_j) − y_j) + (I + dt·DΛ_jᵀ)·d_j − I·d_{j+1}`,
/// the last term present for `j < M`.
pub fn energy_and_gradient(problem: &ProblemSpec, traj: &Trajectory) -> Result<(f64, Vec<DVector<f64>>)> {
    let steps = eval_steps(problem, traj)?;
    let dt = traj.dt();
    let lam = problem.lambda();
    let m = traj.steps();
    let j = dt * steps.iter().map(|s| s.gap).sum::<f64>();
    let diffs: Vec<DVector<f64>> = steps
        .iter()
        .enumerate()
        .map(|(i, s)| traj.state(i + 1) * lam - &s.z)
        .collect();
    let i_diffs: Vec<DVector<f64>> = diffs.par_iter().map(|d| problem.triple.apply_i(d)).collect();
    let grads: Result<Vec<DVector<f64>>> = (1..=m)
        .into_par_iter()
        .map(|k| {
            let t = traj.time(k);
            let u = traj.state(k);
            let s = &steps[k - 1];
            let step = || -> Result<DVector<f64>> {
                let mut g = &i_diffs[k - 1] + problem.lambda_op.dlambda_adjoint(t, u, &diffs[k - 1])? * dt;
                if lam != 0.0 {
                    let gp = problem.potential.grad_psi(t, &(u * lam))?;
                    g += (gp - &s.y) * (dt * lam);
                }
                if k < m {
                    g -= &i_diffs[k];
                }
                Ok(g)
            };
            step().map_err(|e| e.at_step(k))
        })
        .collect();
    Ok((j, grads?))
}

pub fn energy_gradient(problem: &ProblemSpec, traj: &Trajectory) -> Result<Vec<DVector<f64>>> {
    Ok(energy_and_gradient(problem, traj)?.1)
}

/// One step of [`EnergyBreakdown`].
#[derive(Debug, Clone, Serialize)]
pub struct StepTerms {
    pub k: usize,
    pub t: f64,
    /// `Ψ_{t_k}(λu_k)`
    pub psi: f64,
    /// `Ψ*_{t_k}(−D_k − Λ_{t_k}(u_k))`
    pub star: f64,
    /// `λ·⟨u_k, D_k + Λ_{t_k}(u_k)⟩`
    pub pairing: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyBreakdown {
    pub steps: Vec<StepTerms>,
    pub dt: f64,
    /// `J` from the cancellation-free gap; equals `dt·Σ(psi + star + pairing)`
    /// up to round-off in the itemized sum.
    pub total: f64,
}

impl EnergyBreakdown {
    /// `dt·Σ(psi + star + pairing)`.
    pub fn itemized_total(&self) -> f64 {
        self.dt * self.steps.iter().map(|s| s.psi + s.star + s.pairing).sum::<f64>()
    }

    /// CSV with header `k,t,psi,star,pairing`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Input(format!("csv: {e}"));
        w.write_record(["k", "t", "psi", "star", "pairing"]).map_err(io)?;
        for s in &self.steps {
            w.write_record([
                s.k.to_string(),
                fmt_f64(s.t),
                fmt_f64(s.psi),
                fmt_f64(s.star),
                fmt_f64(s.pairing),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Input(e.to_string()))?;
        Ok(())
    }
}

pub fn energy_breakdown(problem: &ProblemSpec, traj: &Trajectory) -> Result<EnergyBreakdown> {
    let evals = eval_steps(problem, traj)?;
    let lam = problem.lambda();
    let steps: Result<Vec<StepTerms>> = evals
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let k = i + 1;
            let t = traj.time(k);
            let u = traj.state(k);
            let psi = problem.potential.eval_psi(t, &(u * lam)).map_err(|e| e.at_step(k))?;
            let star = if problem.potential.is_zero() {
                0.0
            } else {
                // Ψ*(y) = ⟨z, y⟩ − Ψ(z) at the argmax.
                s.z.dot(&s.y) - problem.potential.eval_psi(t, &s.z).map_err(|e| e.at_step(k))?
            };
            let pairing = -lam * u.dot(&s.y);
            Ok(StepTerms {
                k,
                t,
                psi,
                star,
                pairing,
            })
        })
        .collect();
    let dt = traj.dt();
    Ok(EnergyBreakdown {
        steps: steps?,
        dt,
        total: dt * evals.iter().map(|s| s.gap).sum::<f64>(),
    })
}

/// `e(t_m) = ½‖T·u_m‖²_H + dt·Σ_{k≤m} ⟨u_k, Λ_{t_k}(u_k) + DΨ_{t_k}(λu_k)⟩ − ½‖w0‖²_H`
/// for `m = 0..M`.
///
/// On implicit-Euler solutions `e(t_m) = −½·Σ_{k≤m} ‖T(u_k − u_{k−1})‖²_H ≤ 0`.
pub fn energy_balance_audit(problem: &ProblemSpec, traj: &Trajectory) -> Result<Vec<f64>> {
    let lam = problem.lambda();
    let flux: Result<Vec<f64>> = (1..=traj.steps())
        .into_par_iter()
        .map(|k| {
            let t = traj.time(k);
            let u = traj.state(k);
            let step = || -> Result<f64> {
                let mut f = problem.lambda_op.eval_lambda(t, u)?;
                if lam != 0.0 {
                    f += problem.potential.grad_psi(t, &(u * lam))?;
                }
                Ok(u.dot(&f))
            };
            step().map_err(|e| e.at_step(k))
        })
        .collect();
    accumulate_balance(problem, traj, &flux?)
}

pub(crate) fn accumulate_balance(problem: &ProblemSpec, traj: &Trajectory, flux: &[f64]) -> Result<Vec<f64>> {
    let dt = traj.dt();
    let e0 = 0.5 * problem.triple.h_norm_sq(traj.w0())?;
    let mut out = Vec::with_capacity(traj.steps() + 1);
    let mut acc = 0.0;
    for k in 0..=traj.steps() {
        if k > 0 {
            acc += dt * flux[k - 1];
        }
        let tu = problem.triple.apply_t(traj.state(k))?;
        out.push(0.5 * problem.triple.h_norm_sq(&tu)? + acc - e0);
    }
    Ok(out)
}

/// Difference between this energy and the boundary-term form
/// `dt·Σ[Ψ(λu_k) + Ψ*(y_k) + λ⟨u_k, Λ(u_k)⟩] + (λ/2)(‖T·u_M‖² − ‖w0‖²)`.
///
/// It equals `λ·(dt·Σ⟨u_k, D_k⟩ − ½‖T·u_M‖² + ½‖w0‖²) = (λ/2)·Σ‖T(u_k − u_{k−1})‖²_H`,
/// the discrete summation-by-parts defect, which is `O(dt)` on smooth trajectories.
pub fn boundary_form_defect(problem: &ProblemSpec, traj: &Trajectory) -> Result<f64> {
    let lam = problem.lambda();
    if lam == 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for k in 1..=traj.steps() {
        let dw = problem.triple.apply_t(&(traj.state(k) - traj.state(k - 1)))?;
        acc += problem.triple.h_norm_sq(&dw)?;
    }
    Ok(0.5 * lam * acc)
}
