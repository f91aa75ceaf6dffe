//! Second-order hyperbolic and Schrödinger-type systems as first-order pairs.
//!
//! Both builders use the same splitting. `Λ_orig` is the pair operator, the
//! potential is `Ψ(z) = ½·zᵀ·I·z` with `λ = 1`, and `Λ = Λ_orig − I`, so that
//! `Λ + DΨ = Λ_orig`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::grid::{block_diag, on_block, Grid1d};
use super::nonlinearity::{Nonlinearity, PairNonlinearity};
use crate::error::Result;
use crate::operator::{LambdaMap, OperatorKind, OperatorLambda};
use crate::potential::Potential;
use crate::problem::{Lambda, ProblemMeta, ProblemSpec};
use crate::triple::{EvolutionTriple, XNorm};

pub const WAVE_HORIZON: f64 = 1.0;

/// Closures of `u_tt − Δu + ∂_t Υ(u) + div Ξ(u) + Θ(u) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HyperbolicCoefficients {
    /// `Υ`, e.g. `c·u` for linear damping.
    #[serde(default)]
    pub upsilon: Nonlinearity,
    #[serde(default)]
    pub theta: Nonlinearity,
    #[serde(default)]
    pub xi: Nonlinearity,
}

/// `Λ_orig(u, v) = (S₀(v + Υ(u)), h·Δ_h u − h·Θ(u) + h·Gᵀ·Ξ(A·u))` for the
/// reduction `u' + v + Υ(u) = 0`, `v' + Δu − Θ(u) − div Ξ(u) = 0`.
struct HyperbolicMap {
    n: usize,
    h: f64,
    g: DMatrix<f64>,
    avg: DMatrix<f64>,
    lap: DMatrix<f64>,
    s0: DMatrix<f64>,
    c: HyperbolicCoefficients,
}

impl HyperbolicMap {
    fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (x.rows(0, self.n).into_owned(), x.rows(self.n, self.n).into_owned())
    }
}

fn join(a: DVector<f64>, b: DVector<f64>) -> DVector<f64> {
    let n = a.len();
    DVector::from_fn(n + b.len(), |i, _| if i < n { a[i] } else { b[i - n] })
}

impl LambdaMap for HyperbolicMap {
    fn dim(&self) -> usize {
        2 * self.n
    }

    fn apply(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        let (u, v) = self.split(x);
        let top = &self.s0 * (v + self.c.upsilon.apply(&u));
        let bottom =
            (&self.lap * &u - self.c.theta.apply(&u) + self.g.tr_mul(&self.c.xi.apply(&(&self.avg * &u)))) * self.h;
        join(top, bottom)
    }

    fn directional(&self, _t: f64, x: &DVector<f64>, k: &DVector<f64>) -> DVector<f64> {
        let (u, _) = self.split(x);
        let (ku, kv) = self.split(k);
        let top = &self.s0 * (kv + self.c.upsilon.apply_deriv(&u).component_mul(&ku));
        let dxi = self
            .c
            .xi
            .apply_deriv(&(&self.avg * &u))
            .component_mul(&(&self.avg * &ku));
        let bottom = (&self.lap * &ku - self.c.theta.apply_deriv(&u).component_mul(&ku) + self.g.tr_mul(&dxi)) * self.h;
        join(top, bottom)
    }

    fn adjoint(&self, _t: f64, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let (u, _) = self.split(x);
        let (wu, wv) = self.split(w);
        let s0wu = &self.s0 * &wu;
        let dxi = self.c.xi.apply_deriv(&(&self.avg * &u));
        let first = self.c.upsilon.apply_deriv(&u).component_mul(&s0wu)
            + (&self.lap * &wv - self.c.theta.apply_deriv(&u).component_mul(&wv)
                + self.avg.tr_mul(&dxi.component_mul(&(&self.g * &wv))))
                * self.h;
        join(first, s0wu)
    }
}

/// Second-order hyperbolic equation on a 1D Dirichlet grid, state `(u, v)`.
///
/// `H` carries `blockdiag(S₀, h·I)` with `S₀ = h·GᵀG`, so the wave block of
/// `Λ_orig` is exactly skew. Initial data `u = sin(πx)`, `v = −Υ(u)`
/// (`u_t(0) = 0`), horizon `[0, 1]`.
pub fn build_hyperbolic(n: usize, coefficients: HyperbolicCoefficients) -> Result<ProblemSpec> {
    let grid = Grid1d::new(n)?;
    let h = grid.h;
    let g = grid.gradient();
    let s0 = g.tr_mul(&g) * h;
    let gram = block_diag(&s0, &(DMatrix::identity(n, n) * h));
    let xnorm = XNorm::Sum(vec![
        XNorm::power(on_block(&g, n, false), 2.0, h),
        XNorm::power(on_block(&DMatrix::identity(n, n), n, true), 2.0, h),
    ]);
    let triple = EvolutionTriple::with_mass(gram.clone(), xnorm)?;
    let c = coefficients;
    let map = HyperbolicMap {
        n,
        h,
        avg: grid.averaging(),
        lap: grid.laplacian(),
        g,
        s0,
        c,
    };
    let kind = if c.upsilon.is_zero() && c.theta.is_zero() && c.xi.is_zero() {
        OperatorKind::Skew
    } else {
        OperatorKind::Semilinear
    };
    let lambda_op = OperatorLambda::new(map, kind).plus_linear(-gram.clone());
    let u0 = grid.sine_mode();
    let v0 = -c.upsilon.apply(&u0);
    ProblemSpec::new(
        triple,
        Potential::quadratic(gram)?,
        lambda_op,
        Lambda::One,
        (0.0, WAVE_HORIZON),
        join(u0, v0),
        ProblemMeta {
            name: "hyperbolic".into(),
            grid: format!("1d-n{n}x2"),
            boundary: "dirichlet".into(),
            q: 2.0,
        },
    )
}

/// Closures of `u' − Δv + Θ(u, v) = 0`, `v' + Δu + Ξ(u, v) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SchrodingerCouplings {
    #[serde(default)]
    pub theta: PairNonlinearity,
    #[serde(default)]
    pub xi: PairNonlinearity,
}

/// `Λ_orig(u, v) = (P(−Δ_h v + Θ), P(Δ_h u + Ξ))` with `P = h(GᵀG + I)`.
struct SchrodingerMap {
    n: usize,
    lap: DMatrix<f64>,
    p: DMatrix<f64>,
    c: SchrodingerCouplings,
}

impl SchrodingerMap {
    fn partials(f: &PairNonlinearity, u: &DVector<f64>, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = u.len();
        let mut du = DVector::zeros(n);
        let mut dv = DVector::zeros(n);
        for i in 0..n {
            let (a, b) = f.partials(u[i], v[i]);
            du[i] = a;
            dv[i] = b;
        }
        (du, dv)
    }
}

impl LambdaMap for SchrodingerMap {
    fn dim(&self) -> usize {
        2 * self.n
    }

    fn apply(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        let u = x.rows(0, self.n).into_owned();
        let v = x.rows(self.n, self.n).into_owned();
        let th = DVector::from_fn(self.n, |i, _| self.c.theta.value(u[i], v[i]));
        let xi = DVector::from_fn(self.n, |i, _| self.c.xi.value(u[i], v[i]));
        join(&self.p * (th - &self.lap * &v), &self.p * (&self.lap * &u + xi))
    }

    fn directional(&self, _t: f64, x: &DVector<f64>, k: &DVector<f64>) -> DVector<f64> {
        let u = x.rows(0, self.n).into_owned();
        let v = x.rows(self.n, self.n).into_owned();
        let ku = k.rows(0, self.n).into_owned();
        let kv = k.rows(self.n, self.n).into_owned();
        let (tu, tv) = Self::partials(&self.c.theta, &u, &v);
        let (xu, xv) = Self::partials(&self.c.xi, &u, &v);
        let top = tu.component_mul(&ku) + tv.component_mul(&kv) - &self.lap * &kv;
        let bottom = &self.lap * &ku + xu.component_mul(&ku) + xv.component_mul(&kv);
        join(&self.p * top, &self.p * bottom)
    }

    fn adjoint(&self, _t: f64, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let u = x.rows(0, self.n).into_owned();
        let v = x.rows(self.n, self.n).into_owned();
        let pwu = &self.p * w.rows(0, self.n);
        let pwv = &self.p * w.rows(self.n, self.n);
        let (tu, tv) = Self::partials(&self.c.theta, &u, &v);
        let (xu, xv) = Self::partials(&self.c.xi, &u, &v);
        let first = tu.component_mul(&pwu) + &self.lap * &pwv + xu.component_mul(&pwv);
        let second = tv.component_mul(&pwu) - &self.lap * &pwu + xv.component_mul(&pwv);
        join(first, second)
    }
}

/// Schrödinger-type pair on a 1D Dirichlet grid in the `W^{1,2}_0` pair
/// geometry `blockdiag(P, P)`. `P` commutes with `Δ_h`, so the coupling is
/// exactly skew. Initial data `u = sin(πx)`, `v = 0`, horizon `[0, 1]`.
pub fn build_schrodinger(n: usize, couplings: SchrodingerCouplings) -> Result<ProblemSpec> {
    let grid = Grid1d::new(n)?;
    let h = grid.h;
    let g = grid.gradient();
    let p = (g.tr_mul(&g) + DMatrix::identity(n, n)) * h;
    let gram = block_diag(&p, &p);
    let eye = DMatrix::identity(n, n);
    let xnorm = XNorm::Sum(vec![
        XNorm::power(on_block(&g, n, false), 2.0, h),
        XNorm::power(on_block(&eye, n, false), 2.0, h),
        XNorm::power(on_block(&g, n, true), 2.0, h),
        XNorm::power(on_block(&eye, n, true), 2.0, h),
    ]);
    let triple = EvolutionTriple::with_mass(gram.clone(), xnorm)?;
    let kind = if couplings.theta.is_zero() && couplings.xi.is_zero() {
        OperatorKind::Skew
    } else {
        OperatorKind::Semilinear
    };
    let map = SchrodingerMap {
        n,
        lap: grid.laplacian(),
        p,
        c: couplings,
    };
    let lambda_op = OperatorLambda::new(map, kind).plus_linear(-gram.clone());
    ProblemSpec::new(
        triple,
        Potential::quadratic(gram)?,
        lambda_op,
        Lambda::One,
        (0.0, WAVE_HORIZON),
        join(grid.sine_mode(), DVector::zeros(n)),
        ProblemMeta {
            name: "schrodinger".into(),
            grid: format!("1d-n{n}x2"),
            boundary: "dirichlet".into(),
            q: 2.0,
        },
    )
}

/// The pair operator `Λ + DΨ` of a split builder, i.e. `Λ_orig`.
pub fn pair_operator(problem: &ProblemSpec) -> OperatorLambda {
    problem.lambda_op.plus_linear(problem.triple.inclusion().clone())
}
