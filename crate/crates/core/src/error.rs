use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("Legendre conjugate failed to converge after {iterations} iterations (residual {residual:.3e})")]
    ConjugateFailure { iterations: usize, residual: f64 },

    #[error("operator evaluation produced a non-finite value{}", step_suffix(*.step))]
    OperatorEval { step: Option<usize> },

    #[error("Newton step {step} failed: {reason} (residual {residual:.3e})")]
    StepFailure {
        step: usize,
        residual: f64,
        reason: &'static str,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(k) => format!(" at step {k}"),
        None => String::new(),
    }
}

impl Error {
    /// Attaches a time-step index, unless one is already present.
    pub fn at_step(self, step: usize) -> Error {
        match self {
            Error::OperatorEval { step: None } => Error::OperatorEval { step: Some(step) },
            e @ (Error::AtStep { .. } | Error::StepFailure { .. } | Error::OperatorEval { .. }) => e,
            other => Error::AtStep {
                step,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

pub(crate) fn check_finite(v: &nalgebra::DVector<f64>, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
