use nalgebra::DVector;
use serde::Serialize;

use crate::error::{check_finite, check_len, Error, Result};
use crate::operator::OperatorLambda;
use crate::potential::Potential;
use crate::triple::EvolutionTriple;

/// The flag `λ ∈ {0, 1}` multiplying the argument of `DΨ_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Lambda {
    Zero,
    One,
}

impl Lambda {
    pub fn factor(self) -> f64 {
        match self {
            Lambda::Zero => 0.0,
            Lambda::One => 1.0,
        }
    }

    pub fn from_int(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Lambda::Zero),
            1 => Ok(Lambda::One),
            _ => Err(Error::Input(format!("lambda must be 0 or 1, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemMeta {
    pub name: String,
    pub grid: String,
    pub boundary: String,
    /// Growth exponent used by the hypothesis checkers.
    pub q: f64,
}

/// `d/dt(I·u) + Λ_t(u) + DΨ_t(λu) = 0` on `[t0, t1]` with `T·u(t0) = w0`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub triple: EvolutionTriple,
    pub potential: Potential,
    pub lambda_op: OperatorLambda,
    pub lambda_flag: Lambda,
    pub t0: f64,
    pub t1: f64,
    /// Initial datum `w0` in `H`.
    pub initial: DVector<f64>,
    pub meta: ProblemMeta,
}

impl ProblemSpec {
    pub fn new(
        triple: EvolutionTriple,
        potential: Potential,
        lambda_op: OperatorLambda,
        lambda_flag: Lambda,
        horizon: (f64, f64),
        initial: DVector<f64>,
        meta: ProblemMeta,
    ) -> Result<Self> {
        let n = triple.dim();
        check_len(n, lambda_op.dim())?;
        check_len(n, initial.len())?;
        check_finite(&initial, "initial datum")?;
        if !(horizon.1 > horizon.0) || !horizon.0.is_finite() || !horizon.1.is_finite() {
            return Err(Error::Input(format!("invalid horizon ({}, {})", horizon.0, horizon.1)));
        }
        // Probe the potential for dimension consistency.
        potential.eval_psi(horizon.0, &DVector::zeros(n))?;
        Ok(Self {
            triple,
            potential,
            lambda_op,
            lambda_flag,
            t0: horizon.0,
            t1: horizon.1,
            initial,
            meta,
        })
    }

    pub fn dim(&self) -> usize {
        self.triple.dim()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_flag.factor()
    }

    /// `u0 = T⁻¹·w0`.
    pub fn initial_state(&self) -> Result<DVector<f64>> {
        self.triple.lift(&self.initial)
    }

    pub fn with_horizon(mut self, t0: f64, t1: f64) -> Result<Self> {
        if !(t1 > t0) {
            return Err(Error::Input(format!("invalid horizon ({t0}, {t1})")));
        }
        self.t0 = t0;
        self.t1 = t1;
        Ok(self)
    }

    pub fn with_initial(mut self, w0: DVector<f64>) -> Result<Self> {
        check_len(self.dim(), w0.len())?;
        check_finite(&w0, "initial datum")?;
        self.initial = w0;
        Ok(self)
    }

    pub fn with_potential(mut self, potential: Potential) -> Self {
        self.potential = potential;
        self
    }

    pub fn with_lambda_flag(mut self, flag: Lambda) -> Self {
        self.lambda_flag = flag;
        self
    }

    /// Multiplies mass, `Ψ` and `Λ` by `c > 0`. Solutions are unchanged and
    /// the energy scales by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Input("scale factor must be positive".into()));
        }
        Ok(Self {
            triple: self.triple.scaled(c)?,
            potential: self.potential.scaled(c),
            lambda_op: self.lambda_op.scaled(c),
            ..self.clone()
        })
    }
}
