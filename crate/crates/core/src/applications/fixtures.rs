//! Small scalar problems and test fixtures.

use nalgebra::{DMatrix, DVector};

use super::grid::Grid1d;
use super::parabolic::PARABOLIC_HORIZON;
use crate::error::Result;
use crate::operator::{OperatorKind, OperatorLambda};
use crate::potential::Potential;
use crate::problem::{Lambda, ProblemMeta, ProblemSpec};
use crate::triple::{EvolutionTriple, XNorm};

fn scalar_meta(name: &str, q: f64) -> ProblemMeta {
    ProblemMeta {
        name: name.into(),
        grid: "scalar".into(),
        boundary: "none".into(),
        q,
    }
}

/// `u' + u + u = 0`: `Λ(u) = u`, `Ψ = u²/2`, `λ = 1`, `u(0) = 1` on `[0, 1]`.
pub fn scalar_decay() -> ProblemSpec {
    ProblemSpec::new(
        EvolutionTriple::identity(1),
        Potential::quadratic(DMatrix::from_element(1, 1, 1.0)).expect("1 > 0"),
        OperatorLambda::linear(DMatrix::from_element(1, 1, 1.0), OperatorKind::Linear),
        Lambda::One,
        (0.0, 1.0),
        DVector::from_element(1, 1.0),
        scalar_meta("scalar-decay", 2.0),
    )
    .expect("valid scalar problem")
}

/// `Λ(u) = −u³`, `Ψ = 0`, `q = 4`: violates the coercivity condition.
pub fn anti_coercive() -> ProblemSpec {
    let op = OperatorLambda::from_fns(
        1,
        OperatorKind::Semilinear,
        |_, x| x.map(|u| -u * u * u),
        |_, x, h| h.component_mul(&x.map(|u| -3.0 * u * u)),
    );
    ProblemSpec::new(
        EvolutionTriple::identity(1),
        Potential::zero(),
        op,
        Lambda::Zero,
        (0.0, 1.0),
        DVector::from_element(1, 1.0),
        scalar_meta("anti-coercive", 4.0),
    )
    .expect("valid scalar problem")
}

/// Heat operator as `Λ(u) = h·GᵀG·u` with `Ψ = 0`, `λ = 0` and initial datum
/// `amplitude·sin(πx)`; the ε-regularized problems add `ε·DΨ_reg`.
pub fn regularized_heat_core(n: usize, amplitude: f64) -> Result<ProblemSpec> {
    let grid = Grid1d::new(n)?;
    let h = grid.h;
    let g = grid.gradient();
    let triple = EvolutionTriple::with_mass(DMatrix::identity(n, n) * h, XNorm::power(g.clone(), 2.0, h))?;
    let stiffness = g.tr_mul(&g) * h;
    ProblemSpec::new(
        triple,
        Potential::zero(),
        OperatorLambda::linear(stiffness, OperatorKind::Linear),
        Lambda::Zero,
        (0.0, PARABOLIC_HORIZON),
        grid.sine_mode() * amplitude,
        ProblemMeta {
            name: "regularized-heat-core".into(),
            grid: format!("1d-n{n}"),
            boundary: "dirichlet".into(),
            q: 2.0,
        },
    )
}

/// Quartic regularizer `(h/4)·Σ u_i⁴` matching [`regularized_heat_core`].
pub fn quartic_regularizer(n: usize) -> Result<Potential> {
    let grid = Grid1d::new(n)?;
    Potential::pointwise_power(4.0, Some(DVector::from_element(n, grid.h)))
}
