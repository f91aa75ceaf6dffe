//! Global-in-time variational solver for evolution equations
//! `d/dt(I·u) + Λ_t(u) + DΨ_t(λu) = 0`.
//!
//! A trajectory on a uniform grid solves the implicit-Euler discretization
//! exactly when the discrete energy [`energy::energy`] vanishes. The
//! [`minimizer`] drives that energy to zero; the [`oracle`] time-steps the
//! same equations with Newton's method for cross-checking.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod applications;
pub mod continuation;
pub mod energy;
pub mod error;
pub mod minimizer;
pub mod operator;
pub mod oracle;
pub mod potential;
pub mod problem;
pub mod trajectory;
pub mod triple;

pub use energy::{
    energy, energy_and_gradient, energy_balance_audit, energy_breakdown, energy_gradient, EnergyBreakdown,
};
pub use error::{Error, Result};
pub use minimizer::{
    minimize, verify_equivalence, EquivalenceReport, EquivalenceTolerances, MinimizeOptions, SolveResult, SolveStatus,
};
pub use operator::{check_coercivity, check_monotonicity, ConditionReport, OperatorKind, OperatorLambda};
pub use oracle::{implicit_euler_solve, newton_solve_step, OracleOptions, OracleSolution};
pub use potential::Potential;
pub use problem::{Lambda, ProblemMeta, ProblemSpec};
pub use trajectory::{residual, Trajectory};
pub use triple::{EvolutionTriple, XNorm};
