//! Periodic 2D incompressible Navier–Stokes in a divergence-free Fourier basis.
//!
//! The basis consists of the real fields
//! `(−m₂, m₁)·sin(κ·x)/(|κ|π√2)` and `(m₂, −m₁)·cos(κ·x)/(|κ|π√2)` for wave
//! vectors `κ = (m₁, m₂)` in a half plane with `|m₁|, |m₂| ≤ K`. They are
//! orthonormal in `L²([0, 2π]²)` and divergence-free pointwise. With
//! `K = ⌊(k − 1)/3⌋` the `k×k` grid quadrature integrates the trilinear
//! convection form exactly, so the projected convection is exactly skew.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operator::{LambdaMap, OperatorKind, OperatorLambda};
use crate::potential::Potential;
use crate::problem::{Lambda, ProblemMeta, ProblemSpec};
use crate::triple::{EvolutionTriple, XNorm};

pub const NS_HORIZON: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode {
    pub m1: i32,
    pub m2: i32,
    pub sine: bool,
}

impl Mode {
    pub fn kappa_sq(&self) -> f64 {
        (self.m1 * self.m1 + self.m2 * self.m2) as f64
    }
}

/// Basis values and gradients on the grid.
///
/// Grid rows are ordered `component·k² + i·k + j` for the point
/// `(x_i, y_j) = (2πi/k, 2πj/k)`.
#[derive(Debug)]
pub struct NsBasis {
    pub k: usize,
    pub cutoff: usize,
    pub modes: Vec<Mode>,
    /// Velocity values, `2k² × N`.
    pub values: DMatrix<f64>,
    /// `∂x` of the velocity, `2k² × N`.
    pub dx: DMatrix<f64>,
    /// `∂y` of the velocity, `2k² × N`.
    pub dy: DMatrix<f64>,
    /// Quadrature weight `(2π/k)²`.
    pub weight: f64,
}

impl NsBasis {
    pub fn new(k: usize) -> Result<Self> {
        if k < 8 || !k.is_multiple_of(2) {
            return Err(Error::Input(format!("grid size must be even and >= 8, got {k}")));
        }
        let cutoff = (k - 1) / 3;
        let kc = cutoff as i32;
        let mut modes = Vec::new();
        for m1 in 0..=kc {
            for m2 in -kc..=kc {
                if m1 == 0 && m2 <= 0 {
                    continue;
                }
                modes.push(Mode { m1, m2, sine: true });
                modes.push(Mode { m1, m2, sine: false });
            }
        }
        let npts = k * k;
        let nb = modes.len();
        let mut values = DMatrix::zeros(2 * npts, nb);
        let mut dx = DMatrix::zeros(2 * npts, nb);
        let mut dy = DMatrix::zeros(2 * npts, nb);
        let step = 2.0 * PI / k as f64;
        for (col, md) in modes.iter().enumerate() {
            let (m1, m2) = (md.m1 as f64, md.m2 as f64);
            let norm = md.kappa_sq().sqrt() * PI * 2f64.sqrt();
            // Direction (a1, a2) times s(θ), derivative s'(θ)·(m1, m2).
            let (a1, a2) = if md.sine {
                (-m2 / norm, m1 / norm)
            } else {
                (m2 / norm, -m1 / norm)
            };
            for i in 0..k {
                for j in 0..k {
                    let theta = m1 * i as f64 * step + m2 * j as f64 * step;
                    let (s, ds) = if md.sine {
                        (theta.sin(), theta.cos())
                    } else {
                        (theta.cos(), -theta.sin())
                    };
                    let p = i * k + j;
                    values[(p, col)] = a1 * s;
                    values[(npts + p, col)] = a2 * s;
                    dx[(p, col)] = a1 * ds * m1;
                    dx[(npts + p, col)] = a2 * ds * m1;
                    dy[(p, col)] = a1 * ds * m2;
                    dy[(npts + p, col)] = a2 * ds * m2;
                }
            }
        }
        Ok(Self {
            k,
            cutoff,
            modes,
            values,
            dx,
            dy,
            weight: step * step,
        })
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn points(&self) -> usize {
        self.k * self.k
    }

    /// `|κ|²` per basis function.
    pub fn kappa_sq(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.modes.iter().map(Mode::kappa_sq))
    }

    /// Grid velocity `(u₁; u₂)` stacked, length `2k²`.
    pub fn velocity(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.values * a
    }

    /// `∂x u₁ + ∂y u₂` at every grid point from the basis gradients.
    pub fn divergence_on_grid(&self, a: &DVector<f64>) -> DVector<f64> {
        let np = self.points();
        let ux = &self.dx * a;
        let uy = &self.dy * a;
        DVector::from_fn(np, |p, _| ux[p] + uy[np + p])
    }

    /// `L²` projection of a grid velocity field onto the basis.
    pub fn project(&self, field: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(2 * self.points(), field.len())?;
        Ok(self.values.tr_mul(field) * self.weight)
    }

    /// Projects `f(x, y) -> (u₁, u₂)` sampled on the grid.
    pub fn project_fn(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> DVector<f64> {
        let np = self.points();
        let step = 2.0 * PI / self.k as f64;
        let mut field = DVector::zeros(2 * np);
        for i in 0..self.k {
            for j in 0..self.k {
                let (u1, u2) = f(i as f64 * step, j as f64 * step);
                field[i * self.k + j] = u1;
                field[np + i * self.k + j] = u2;
            }
        }
        self.values.tr_mul(&field) * self.weight
    }

    /// `(u·∇)u` on the grid.
    fn convection(&self, u: &DVector<f64>, ux: &DVector<f64>, uy: &DVector<f64>) -> DVector<f64> {
        let np = self.points();
        DVector::from_fn(2 * np, |r, _| {
            let p = r % np;
            u[p] * ux[r] + u[np + p] * uy[r]
        })
    }
}

/// `Λ(a) = ∫ e_j·(u·∇)u − f_j`.
struct ConvectionMap {
    basis: Arc<NsBasis>,
    forcing: DVector<f64>,
}

impl ConvectionMap {
    fn fields(&self, a: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        (&self.basis.values * a, &self.basis.dx * a, &self.basis.dy * a)
    }

    /// `(δu·∇)u + (u·∇)δu` on the grid, one column per basis direction.
    fn linearized(&self, a: &DVector<f64>) -> DMatrix<f64> {
        let b = &*self.basis;
        let np = b.points();
        let (u, ux, uy) = self.fields(a);
        let mut c = DMatrix::zeros(2 * np, b.dim());
        for col in 0..b.dim() {
            let d = b.values.column(col);
            let dxc = b.dx.column(col);
            let dyc = b.dy.column(col);
            let mut out = c.column_mut(col);
            for r in 0..2 * np {
                let p = r % np;
                out[r] = d[p] * ux[r] + d[np + p] * uy[r] + u[p] * dxc[r] + u[np + p] * dyc[r];
            }
        }
        c
    }
}

impl LambdaMap for ConvectionMap {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn apply(&self, _t: f64, a: &DVector<f64>) -> DVector<f64> {
        let (u, ux, uy) = self.fields(a);
        let conv = self.basis.convection(&u, &ux, &uy);
        self.basis.values.tr_mul(&conv) * self.basis.weight - &self.forcing
    }

    fn directional(&self, _t: f64, a: &DVector<f64>, h: &DVector<f64>) -> DVector<f64> {
        let b = &*self.basis;
        let np = b.points();
        let (u, ux, uy) = self.fields(a);
        let (d, dx, dy) = self.fields(h);
        let lin = DVector::from_fn(2 * np, |r, _| {
            let p = r % np;
            d[p] * ux[r] + d[np + p] * uy[r] + u[p] * dx[r] + u[np + p] * dy[r]
        });
        b.values.tr_mul(&lin) * b.weight
    }

    fn jacobian(&self, _t: f64, a: &DVector<f64>) -> DMatrix<f64> {
        self.basis.values.tr_mul(&self.linearized(a)) * self.basis.weight
    }

    fn adjoint(&self, _t: f64, a: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        // Cᵀ·(E·w) with C the linearized convection columns.
        let ew = &self.basis.values * w;
        self.linearized(a).tr_mul(&ew) * self.basis.weight
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NsForcing {
    None,
    /// `f = (amp·sin(m·y), 0)`.
    Kolmogorov {
        m: i32,
        amp: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NsInitial {
    /// Stream function `ψ = A·sin x·sin y`, `u = (∂yψ, −∂xψ)`.
    TaylorGreen { amplitude: f64 },
    /// Random coefficients with amplitude `∝ 1/|κ|²`, scaled to `½‖u‖² = energy`.
    RandomModes { seed: u64, energy: f64 },
}

/// A Navier–Stokes problem together with its basis.
#[derive(Debug, Clone)]
pub struct NavierStokes2d {
    pub problem: ProblemSpec,
    pub basis: Arc<NsBasis>,
}

/// Periodic NS on `[0, 2π]²` with viscosity `ν`.
///
/// `mass = I`, `Ψ(a) = ½·Σ ν|κ|²a²`, `λ = 1`, `Λ` = projected convection
/// minus forcing, `‖a‖_X = (Σ|κ|²a²)^{1/2}`, horizon `[0, 1]`.
pub fn build_navier_stokes_2d(k: usize, nu: f64, forcing: &NsForcing, initial: &NsInitial) -> Result<NavierStokes2d> {
    if !(nu > 0.0) {
        return Err(Error::Input(format!("viscosity must be positive, got {nu}")));
    }
    let basis = Arc::new(NsBasis::new(k)?);
    let n = basis.dim();
    let kappa2 = basis.kappa_sq();
    let triple = EvolutionTriple::identity(n);
    let triple = EvolutionTriple::new(
        triple.mass().clone(),
        triple.t_map().clone(),
        XNorm::power(DMatrix::from_diagonal(&kappa2.map(f64::sqrt)), 2.0, 1.0),
    )?;
    let potential = Potential::quadratic(DMatrix::from_diagonal(&(&kappa2 * nu)))?;
    let f = match forcing {
        NsForcing::None => DVector::zeros(n),
        NsForcing::Kolmogorov { m, amp } => {
            let (m, amp) = (*m as f64, *amp);
            basis.project_fn(|_, y| (amp * (m * y).sin(), 0.0))
        }
    };
    let w0 = match initial {
        NsInitial::TaylorGreen { amplitude } => {
            let a = *amplitude;
            basis.project_fn(|x, y| (a * x.sin() * y.cos(), -a * x.cos() * y.sin()))
        }
        NsInitial::RandomModes { seed, energy } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let raw = DVector::from_fn(n, |i, _| rng.random_range(-1.0..1.0) / kappa2[i]);
            let e = 0.5 * raw.norm_squared();
            if e == 0.0 {
                raw
            } else {
                raw * (energy / e).sqrt()
            }
        }
    };
    let lambda_op = OperatorLambda::new(
        ConvectionMap {
            basis: basis.clone(),
            forcing: f,
        },
        OperatorKind::Convective,
    );
    let problem = ProblemSpec::new(
        triple,
        potential,
        lambda_op,
        Lambda::One,
        (0.0, NS_HORIZON),
        w0,
        ProblemMeta {
            name: "navier-stokes-2d".into(),
            grid: format!("periodic-{k}x{k}"),
            boundary: "periodic".into(),
            q: 2.0,
        },
    )?;
    Ok(NavierStokes2d { problem, basis })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes_and_orthonormality() {
        let b = NsBasis::new(16).unwrap();
        assert_eq!(b.cutoff, 5);
        assert_eq!(b.dim(), 120);
        let gram = b.values.tr_mul(&b.values) * b.weight;
        assert!((gram - DMatrix::identity(120, 120)).amax() < 1e-12);
        assert_eq!(NsBasis::new(32).unwrap().dim(), 440);
        assert!(NsBasis::new(9).is_err());
        assert!(NsBasis::new(6).is_err());
    }

    #[test]
    fn basis_is_divergence_free() {
        let b = NsBasis::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DVector::from_fn(b.dim(), |_, _| rng.random_range(-1.0..1.0));
        assert!(b.divergence_on_grid(&a).amax() < 1e-12);
    }

    #[test]
    fn convection_is_skew() {
        let ns = build_navier_stokes_2d(
            8,
            0.1,
            &NsForcing::None,
            &NsInitial::RandomModes { seed: 2, energy: 1.0 },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = DVector::from_fn(ns.basis.dim(), |_, _| rng.random_range(-3.0..3.0));
            let c = ns.problem.lambda_op.eval_lambda(0.0, &a).unwrap();
            assert!(a.dot(&c).abs() < 1e-12 * (1.0 + a.norm_squared() * a.norm()));
        }
    }

    #[test]
    fn taylor_green_projects_onto_two_modes_and_is_steady() {
        let ns = build_navier_stokes_2d(16, 0.1, &NsForcing::None, &NsInitial::TaylorGreen { amplitude: 1.0 }).unwrap();
        let a = &ns.problem.initial;
        let active: Vec<Mode> = ns
            .basis
            .modes
            .iter()
            .zip(a.iter())
            .filter(|(_, v)| v.abs() > 1e-12)
            .map(|(m, _)| *m)
            .collect();
        assert_eq!(active.len(), 2);
        assert!(active.iter().all(|m| m.kappa_sq() == 2.0));
        // ‖u‖² = ∫(sin²x cos²y + cos²x sin²y) = 2π².
        assert!((a.norm_squared() - 2.0 * PI * PI).abs() < 1e-10);
        // (u·∇)u is a gradient, so its projection vanishes.
        assert!(ns.problem.lambda_op.eval_lambda(0.0, a).unwrap().amax() < 1e-12);
    }

    #[test]
    fn jacobian_and_adjoint_agree_with_directional() {
        let ns = build_navier_stokes_2d(
            8,
            0.1,
            &NsForcing::Kolmogorov { m: 1, amp: 0.5 },
            &NsInitial::RandomModes { seed: 3, energy: 1.0 },
        )
        .unwrap();
        let op = &ns.problem.lambda_op;
        let n = ns.basis.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let h = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let w = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let jac = op.jacobian(0.0, &a).unwrap();
        assert!((&jac * &h - op.dlambda(0.0, &a, &h).unwrap()).amax() < 1e-12);
        assert!((jac.tr_mul(&w) - op.dlambda_adjoint(0.0, &a, &w).unwrap()).amax() < 1e-12);
    }
}
