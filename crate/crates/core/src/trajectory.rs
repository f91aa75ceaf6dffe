//! Trajectories on a uniform grid and the backward-difference residual.

use std::io::{Read, Write};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{check_finite, check_len, Error, Result};
use crate::problem::ProblemSpec;
use crate::triple::EvolutionTriple;

/// States `u_0..u_M` at `t_k = t0 + k·dt`, with `T·u_0 = w0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<DVector<f64>>,
    t0: f64,
    t1: f64,
    w0: DVector<f64>,
}

impl Trajectory {
    /// Validates finiteness, shapes and the initial constraint against `triple`.
    pub fn new(
        triple: &EvolutionTriple,
        states: Vec<DVector<f64>>,
        t0: f64,
        t1: f64,
        w0: DVector<f64>,
    ) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::Input("a trajectory needs at least two grid points".into()));
        }
        if !(t1 > t0) {
            return Err(Error::Input(format!("invalid horizon ({t0}, {t1})")));
        }
        let n = triple.dim();
        check_len(n, w0.len())?;
        for s in &states {
            check_len(n, s.len())?;
            check_finite(s, "trajectory state")?;
        }
        let gap = triple.apply_t(&states[0])? - &w0;
        let gap = triple.h_norm_sq(&gap)?.sqrt();
        let scale = 1.0f64.max(triple.h_norm_sq(&w0)?.sqrt());
        if gap > 1e-12 * scale {
            return Err(Error::Input(format!(
                "initial state violates T·u0 = w0 (gap {gap:.3e})"
            )));
        }
        Ok(Self { states, t0, t1, w0 })
    }

    /// `u_k := u_0` for every `k`.
    pub fn constant_extension(problem: &ProblemSpec, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Input("number of steps must be at least 1".into()));
        }
        let u0 = problem.initial_state()?;
        Self::new(
            &problem.triple,
            vec![u0; m + 1],
            problem.t0,
            problem.t1,
            problem.initial.clone(),
        )
    }

    /// Same grid and initial datum with new free states `u_1..u_M`.
    pub fn with_free_states(&self, free: Vec<DVector<f64>>) -> Result<Self> {
        check_len(self.steps(), free.len())?;
        let mut states = Vec::with_capacity(free.len() + 1);
        states.push(self.states[0].clone());
        for s in free {
            check_len(self.dim(), s.len())?;
            check_finite(&s, "trajectory state")?;
            states.push(s);
        }
        Ok(Self {
            states,
            t0: self.t0,
            t1: self.t1,
            w0: self.w0.clone(),
        })
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &DVector<f64> {
        &self.states[k]
    }

    pub fn final_state(&self) -> &DVector<f64> {
        &self.states[self.steps()]
    }

    pub fn w0(&self) -> &DVector<f64> {
        &self.w0
    }

    pub fn horizon(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    /// `M`.
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.steps() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps() {
            self.t1
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    /// Flattened free states `u_1..u_M`.
    pub fn free_vector(&self) -> DVector<f64> {
        let n = self.dim();
        let m = self.steps();
        DVector::from_fn(n * m, |i, _| self.states[1 + i / n][i % n])
    }

    pub fn from_free_vector(&self, v: &DVector<f64>) -> Result<Self> {
        let n = self.dim();
        check_len(n * self.steps(), v.len())?;
        let free = (0..self.steps()).map(|k| v.rows(k * n, n).into_owned()).collect();
        self.with_free_states(free)
    }

    /// `max_k ‖u_k − v_k‖∞`.
    pub fn max_distance(&self, other: &Trajectory) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max))
    }

    pub fn check_same_grid(&self, other: &Trajectory) -> Result<()> {
        if self.steps() != other.steps() || self.dim() != other.dim() {
            return Err(Error::GridMismatch(format!(
                "{} steps x {} dofs vs {} steps x {} dofs",
                self.steps(),
                self.dim(),
                other.steps(),
                other.dim()
            )));
        }
        if self.t0 != other.t0 || self.t1 != other.t1 {
            return Err(Error::GridMismatch(format!(
                "horizon ({}, {}) vs ({}, {})",
                self.t0, self.t1, other.t0, other.t1
            )));
        }
        if (&self.w0 - &other.w0).amax() > 1e-12 * (1.0 + self.w0.amax()) {
            return Err(Error::GridMismatch("initial data differ".into()));
        }
        Ok(())
    }

    /// `D_k = (I·u_k − I·u_{k−1})/dt` for `k = 1..M`.
    pub fn time_derivative(&self, triple: &EvolutionTriple) -> Result<Vec<DVector<f64>>> {
        check_len(triple.dim(), self.dim())?;
        let dt = self.dt();
        Ok((1..=self.steps())
            .map(|k| triple.apply_i(&(&self.states[k] - &self.states[k - 1])) / dt)
            .collect())
    }

    /// CSV with header `t,x_0,...,x_{n-1}` at 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.dim()).map(|i| format!("x_{i}")));
        w.write_record(&header).map_err(csv_err)?;
        for (k, s) in self.states.iter().enumerate() {
            let mut row = vec![fmt_f64(self.time(k))];
            row.extend(s.iter().map(|v| fmt_f64(*v)));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Input(e.to_string()))?;
        Ok(())
    }

    /// Reads a CSV written by [`Trajectory::write_csv`]; `w0 = T·u_0`.
    pub fn read_csv<R: Read>(triple: &EvolutionTriple, input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut times = Vec::new();
        let mut states = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Input(format!("bad number in trajectory CSV: {e}")))?;
            if vals.len() < 2 {
                return Err(Error::Input("trajectory CSV row too short".into()));
            }
            times.push(vals[0]);
            states.push(DVector::from_row_slice(&vals[1..]));
        }
        if states.is_empty() {
            return Err(Error::Input("empty trajectory CSV".into()));
        }
        let w0 = triple.apply_t(&states[0])?;
        Self::new(triple, states, times[0], *times.last().unwrap_or(&times[0]), w0)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Input(format!("csv: {e}"))
}

/// Full-precision decimal rendering shared by all CSV writers.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `r_k = D_k + Λ_{t_k}(u_k) + DΨ_{t_k}(λ·u_k)` for `k = 1..M`.
pub fn residual(problem: &ProblemSpec, traj: &Trajectory) -> Result<Vec<DVector<f64>>> {
    check_len(problem.dim(), traj.dim())?;
    let d = traj.time_derivative(&problem.triple)?;
    let lam = problem.lambda();
    (1..=traj.steps())
        .into_par_iter()
        .map(|k| {
            let t = traj.time(k);
            let u = traj.state(k);
            let step = || -> Result<DVector<f64>> {
                let mut r = &d[k - 1] + problem.lambda_op.eval_lambda(t, u)?;
                if lam != 0.0 {
                    r += problem.potential.grad_psi(t, &(u * lam))?;
                }
                Ok(r)
            };
            step().map_err(|e| e.at_step(k))
        })
        .collect()
}

/// `max_k ‖r_k‖∞`.
pub fn max_residual(problem: &ProblemSpec, traj: &Trajectory) -> Result<f64> {
    Ok(residual(problem, traj)?.iter().map(|r| r.amax()).fold(0.0, f64::max))
}
