//! Parabolic systems on a 1D Dirichlet grid.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::grid::Grid1d;
use super::nonlinearity::Nonlinearity;
use crate::error::{Error, Result};
use crate::operator::{LambdaMap, OperatorKind, OperatorLambda};
use crate::potential::{signed_pow, Potential};
use crate::problem::{Lambda, ProblemMeta, ProblemSpec};
use crate::trajectory::Trajectory;
use crate::triple::{EvolutionTriple, XNorm};

/// Default horizon of the 1D parabolic builders.
pub const PARABOLIC_HORIZON: f64 = 0.1;

/// Pointwise closures of `du/dt = Θ(u) + div Ξ(u) + div Γ(∇u) + div D_AΨ(∇u)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DivergenceCoefficients {
    #[serde(default)]
    pub theta: Nonlinearity,
    #[serde(default)]
    pub xi: Nonlinearity,
    #[serde(default)]
    pub gamma: Nonlinearity,
}

/// `Λ(u) = h·[−Θ(u) + Gᵀ·Ξ(A·u) + Gᵀ·Γ(G·u)]`.
struct DivergenceMap {
    h: f64,
    g: DMatrix<f64>,
    avg: DMatrix<f64>,
    c: DivergenceCoefficients,
}

impl LambdaMap for DivergenceMap {
    fn dim(&self) -> usize {
        self.g.ncols()
    }

    fn apply(&self, _t: f64, u: &DVector<f64>) -> DVector<f64> {
        let flux = self.c.xi.apply(&(&self.avg * u)) + self.c.gamma.apply(&(&self.g * u));
        (self.g.tr_mul(&flux) - self.c.theta.apply(u)) * self.h
    }

    fn directional(&self, _t: f64, u: &DVector<f64>, k: &DVector<f64>) -> DVector<f64> {
        let au = &self.avg * u;
        let gu = &self.g * u;
        let flux = self.c.xi.apply_deriv(&au).component_mul(&(&self.avg * k))
            + self.c.gamma.apply_deriv(&gu).component_mul(&(&self.g * k));
        (self.g.tr_mul(&flux) - self.c.theta.apply_deriv(u).component_mul(k)) * self.h
    }

    fn jacobian(&self, _t: f64, u: &DVector<f64>) -> DMatrix<f64> {
        let dxi = self.c.xi.apply_deriv(&(&self.avg * u));
        let dgamma = self.c.gamma.apply_deriv(&(&self.g * u));
        let inner = scale_rows(&self.avg, &dxi) + scale_rows(&self.g, &dgamma);
        let mut jac = self.g.tr_mul(&inner);
        let dtheta = self.c.theta.apply_deriv(u);
        for i in 0..u.len() {
            jac[(i, i)] -= dtheta[i];
        }
        jac * self.h
    }

    fn adjoint(&self, _t: f64, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let gw = &self.g * w;
        let dxi = self.c.xi.apply_deriv(&(&self.avg * u));
        let dgamma = self.c.gamma.apply_deriv(&(&self.g * u));
        (self.avg.tr_mul(&dxi.component_mul(&gw)) + self.g.tr_mul(&dgamma.component_mul(&gw))
            - self.c.theta.apply_deriv(u).component_mul(w))
            * self.h
    }
}

/// `diag(d)·M`.
pub(crate) fn scale_rows(m: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (mut row, di) in out.row_iter_mut().zip(d.iter()) {
        row *= *di;
    }
    out
}

/// `du/dt = Θ(u) + div Ξ(u) + div Γ(∇u) + div(|∇u|^{q−2}∇u)` with zero
/// Dirichlet data.
///
/// `mass = h·I`, `Ψ(u) = (h/q)·Σ|G·u|^q`, `λ = 1`, `‖u‖_X = (h·Σ|G·u|^q)^{1/q}`,
/// initial datum `sin(πx)` on `[0, 0.1]`. With `q = 2` and zero coefficients
/// this is the discrete heat equation.
pub fn build_parabolic_divergence(n: usize, q: f64, coefficients: DivergenceCoefficients) -> Result<ProblemSpec> {
    let grid = Grid1d::new(n)?;
    if !(q >= 2.0) {
        return Err(Error::Input(format!("q must be >= 2, got {q}")));
    }
    let h = grid.h;
    let g = grid.gradient();
    let triple = EvolutionTriple::with_mass(DMatrix::identity(n, n) * h, XNorm::power(g.clone(), q, h))?;
    let potential = Potential::composed_power(g.clone(), q, h)?;
    let c = coefficients;
    let lambda_op = if c.theta.is_zero() && c.xi.is_zero() && c.gamma.is_zero() {
        OperatorLambda::zero(n)
    } else {
        let kind = if c.gamma.is_zero() {
            OperatorKind::Semilinear
        } else {
            OperatorKind::Quasilinear
        };
        OperatorLambda::new(
            DivergenceMap {
                h,
                avg: grid.averaging(),
                g,
                c,
            },
            kind,
        )
    };
    let name = if q == 2.0 && lambda_op.kind() == OperatorKind::Linear {
        "heat".to_string()
    } else {
        format!("parabolic-divergence-q{q}")
    };
    ProblemSpec::new(
        triple,
        potential,
        lambda_op,
        Lambda::One,
        (0.0, PARABOLIC_HORIZON),
        grid.sine_mode(),
        ProblemMeta {
            name,
            grid: format!("1d-n{n}"),
            boundary: "dirichlet".into(),
            q,
        },
    )
}

/// The discrete heat equation `u' = Δ_h u`.
pub fn build_heat(n: usize) -> Result<ProblemSpec> {
    build_parabolic_divergence(n, 2.0, DivergenceCoefficients::default())
}

/// `u(x, t) = e^{−π²t}·sin(πx)` sampled at `m + 1` times on `[0, t1]`.
pub fn exact_heat_solution(n: usize, m: usize, t1: f64) -> Result<Trajectory> {
    let grid = Grid1d::new(n)?;
    if m == 0 {
        return Err(Error::Input("number of steps must be at least 1".into()));
    }
    let triple = EvolutionTriple::with_mass(DMatrix::identity(n, n) * grid.h, XNorm::Euclidean)?;
    let s = grid.sine_mode();
    let pi2 = std::f64::consts::PI.powi(2);
    let states = (0..=m)
        .map(|k| {
            let t = if k == m { t1 } else { t1 * k as f64 / m as f64 };
            &s * (-pi2 * t).exp()
        })
        .collect();
    Trajectory::new(&triple, states, 0.0, t1, s)
}

/// Pointwise closures of `du/dt = Θ(u) + Γ(Δu) + ∇_LΨ(Δu)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NondivergenceCoefficients {
    #[serde(default)]
    pub theta: Nonlinearity,
    #[serde(default)]
    pub gamma: Nonlinearity,
}

/// `Λ(u) = −S·(Θ(u) + Γ(Δ_h u)) − h·φ_q(Δ_h u)` with `S = h(GᵀG + I)` and
/// `φ_q(s) = |s|^{q−2}s`.
struct NondivergenceMap {
    h: f64,
    q: f64,
    lap: DMatrix<f64>,
    gram: DMatrix<f64>,
    c: NondivergenceCoefficients,
}

impl NondivergenceMap {
    fn phi_deriv(&self, l: &DVector<f64>) -> DVector<f64> {
        let q = self.q;
        l.map(|s| {
            if q == 2.0 {
                1.0
            } else {
                (q - 1.0) * s.abs().powf(q - 2.0)
            }
        })
    }
}

impl LambdaMap for NondivergenceMap {
    fn dim(&self) -> usize {
        self.lap.ncols()
    }

    fn apply(&self, _t: f64, u: &DVector<f64>) -> DVector<f64> {
        let l = &self.lap * u;
        let src = self.c.theta.apply(u) + self.c.gamma.apply(&l);
        -(&self.gram * src) - l.map(|s| signed_pow(s, self.q - 1.0)) * self.h
    }

    fn directional(&self, _t: f64, u: &DVector<f64>, k: &DVector<f64>) -> DVector<f64> {
        let l = &self.lap * u;
        let lk = &self.lap * k;
        let dsrc = self.c.theta.apply_deriv(u).component_mul(k) + self.c.gamma.apply_deriv(&l).component_mul(&lk);
        -(&self.gram * dsrc) - self.phi_deriv(&l).component_mul(&lk) * self.h
    }

    fn jacobian(&self, _t: f64, u: &DVector<f64>) -> DMatrix<f64> {
        let l = &self.lap * u;
        let mut src = scale_rows(&self.lap, &self.c.gamma.apply_deriv(&l));
        let dtheta = self.c.theta.apply_deriv(u);
        for i in 0..u.len() {
            src[(i, i)] += dtheta[i];
        }
        -(&self.gram * src) - scale_rows(&self.lap, &self.phi_deriv(&l)) * self.h
    }

    fn adjoint(&self, _t: f64, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let l = &self.lap * u;
        let sw = &self.gram * w;
        let a = self.c.theta.apply_deriv(u).component_mul(&sw)
            + self.lap.tr_mul(&self.c.gamma.apply_deriv(&l).component_mul(&sw));
        -a - self.lap.tr_mul(&self.phi_deriv(&l).component_mul(w)) * self.h
    }
}

/// Non-divergence parabolic equation in the discrete `W^{1,2}_0` geometry.
///
/// `mass = h(GᵀG + I)`, `Ψ(u) = (h/q)·Σ|Δ_h u|^q`, `λ = 1`,
/// `‖u‖_X = ‖Δ_h u‖_{q,h} + ‖G·u‖_{2,h}`.
pub fn build_parabolic_nondivergence(n: usize, q: f64, coefficients: NondivergenceCoefficients) -> Result<ProblemSpec> {
    let grid = Grid1d::new(n)?;
    if !(q >= 2.0) {
        return Err(Error::Input(format!("q must be >= 2, got {q}")));
    }
    let h = grid.h;
    let g = grid.gradient();
    let lap = grid.laplacian();
    let gram = (g.tr_mul(&g) + DMatrix::identity(n, n)) * h;
    let xnorm = XNorm::Sum(vec![XNorm::power(lap.clone(), q, h), XNorm::power(g, 2.0, h)]);
    let triple = EvolutionTriple::with_mass(gram.clone(), xnorm)?;
    let potential = Potential::composed_power(lap.clone(), q, h)?;
    let kind = if coefficients.gamma.is_zero() && q == 2.0 {
        if coefficients.theta.is_zero() {
            OperatorKind::Linear
        } else {
            OperatorKind::Semilinear
        }
    } else {
        OperatorKind::Quasilinear
    };
    let lambda_op = OperatorLambda::new(
        NondivergenceMap {
            h,
            q,
            lap,
            gram,
            c: coefficients,
        },
        kind,
    );
    ProblemSpec::new(
        triple,
        potential,
        lambda_op,
        Lambda::One,
        (0.0, PARABOLIC_HORIZON),
        grid.sine_mode(),
        ProblemMeta {
            name: format!("parabolic-nondivergence-q{q}"),
            grid: format!("1d-n{n}"),
            boundary: "dirichlet".into(),
            q,
        },
    )
}
