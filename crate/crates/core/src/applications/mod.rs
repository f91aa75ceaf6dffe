//! Problem builders on desk-scale grids.
//!
//! 1D Dirichlet grids for the parabolic, hyperbolic and Schrödinger systems,
//! a periodic 2D grid for Navier–Stokes.

mod fixtures;
mod grid;
mod navier_stokes;
mod nonlinearity;
mod parabolic;
mod waves;

pub use fixtures::{anti_coercive, quartic_regularizer, regularized_heat_core, scalar_decay};
pub use grid::Grid1d;
pub use navier_stokes::{build_navier_stokes_2d, Mode, NavierStokes2d, NsBasis, NsForcing, NsInitial, NS_HORIZON};
pub use nonlinearity::{Nonlinearity, PairNonlinearity};
pub use parabolic::{
    build_heat, build_parabolic_divergence, build_parabolic_nondivergence, exact_heat_solution, DivergenceCoefficients,
    NondivergenceCoefficients, PARABOLIC_HORIZON,
};
pub use waves::{
    build_hyperbolic, build_schrodinger, pair_operator, HyperbolicCoefficients, SchrodingerCouplings, WAVE_HORIZON,
};
