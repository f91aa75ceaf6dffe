//! Time-dependent nonlinear maps `Λ_t: X → X*` and sampled hypothesis checks.
//!
//! The checkers fit constants on random samples. A finite sampler can only
//! falsify the universally quantified inequalities, never prove them, and
//! every report carries that caveat in its `note`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::problem::{Lambda, ProblemSpec};

/// Structural label of an operator, used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Linear,
    Semilinear,
    Quasilinear,
    Skew,
    Convective,
}

/// The evaluation contract behind an [`OperatorLambda`].
///
/// `jacobian` and `adjoint` have column-by-column defaults; implementors with
/// structure should override them.
pub trait LambdaMap: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, t: f64, x: &DVector<f64>) -> DVector<f64>;

    /// `DΛ_t(x)·h`.
    fn directional(&self, t: f64, x: &DVector<f64>, h: &DVector<f64>) -> DVector<f64>;

    fn jacobian(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        let mut e = DVector::zeros(n);
        for j in 0..n {
            e[j] = 1.0;
            jac.set_column(j, &self.directional(t, x, &e));
            e[j] = 0.0;
        }
        jac
    }

    /// `DΛ_t(x)ᵀ·w`.
    fn adjoint(&self, t: f64, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        self.jacobian(t, x).tr_mul(w)
    }
}

/// `Λ(x) = A·x`.
pub struct LinearMap(pub DMatrix<f64>);

impl LambdaMap for LinearMap {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        &self.0 * x
    }
    fn directional(&self, _t: f64, _x: &DVector<f64>, h: &DVector<f64>) -> DVector<f64> {
        &self.0 * h
    }
    fn jacobian(&self, _t: f64, _x: &DVector<f64>) -> DMatrix<f64> {
        self.0.clone()
    }
    fn adjoint(&self, _t: f64, _x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        self.0.tr_mul(w)
    }
}

type EvalFn = dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync;
type DerivFn = dyn Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync;

/// Closure-backed map.
pub struct FnMap {
    dim: usize,
    eval: Arc<EvalFn>,
    dderiv: Arc<DerivFn>,
}

impl LambdaMap for FnMap {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        (self.eval)(t, x)
    }
    fn directional(&self, t: f64, x: &DVector<f64>, h: &DVector<f64>) -> DVector<f64> {
        (self.dderiv)(t, x, h)
    }
}

struct ShiftedMap {
    base: OperatorLambda,
    linear: DMatrix<f64>,
}

impl LambdaMap for ShiftedMap {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn apply(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.base.map.apply(t, x) + &self.linear * x
    }
    fn directional(&self, t: f64, x: &DVector<f64>, h: &DVector<f64>) -> DVector<f64> {
        self.base.map.directional(t, x, h) + &self.linear * h
    }
    fn jacobian(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        self.base.map.jacobian(t, x) + &self.linear
    }
    fn adjoint(&self, t: f64, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        self.base.map.adjoint(t, x, w) + self.linear.tr_mul(w)
    }
}

struct ScaledMap {
    base: OperatorLambda,
    factor: f64,
}

impl LambdaMap for ScaledMap {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn apply(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.base.map.apply(t, x) * self.factor
    }
    fn directional(&self, t: f64, x: &DVector<f64>, h: &DVector<f64>) -> DVector<f64> {
        self.base.map.directional(t, x, h) * self.factor
    }
    fn jacobian(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        self.base.map.jacobian(t, x) * self.factor
    }
    fn adjoint(&self, t: f64, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        self.base.map.adjoint(t, x, w) * self.factor
    }
}

/// A time-dependent operator `Λ_t` together with its kind tag.
#[derive(Clone)]
pub struct OperatorLambda {
    map: Arc<dyn LambdaMap>,
    kind: OperatorKind,
}

impl fmt::Debug for OperatorLambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorLambda")
            .field("dim", &self.dim())
            .field("kind", &self.kind)
            .finish()
    }
}

impl OperatorLambda {
    pub fn new(map: impl LambdaMap + 'static, kind: OperatorKind) -> Self {
        Self {
            map: Arc::new(map),
            kind,
        }
    }

    pub fn zero(n: usize) -> Self {
        Self::linear(DMatrix::zeros(n, n), OperatorKind::Linear)
    }

    pub fn linear(a: DMatrix<f64>, kind: OperatorKind) -> Self {
        Self::new(LinearMap(a), kind)
    }

    pub fn from_fns(
        dim: usize,
        kind: OperatorKind,
        eval: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        dderiv: impl Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Self::new(
            FnMap {
                dim,
                eval: Arc::new(eval),
                dderiv: Arc::new(dderiv),
            },
            kind,
        )
    }

    /// `Λ + A`, keeping this operator's kind tag.
    pub fn plus_linear(&self, a: DMatrix<f64>) -> Self {
        let kind = self.kind;
        Self::new(
            ShiftedMap {
                base: self.clone(),
                linear: a,
            },
            kind,
        )
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let kind = self.kind;
        Self::new(
            ScaledMap {
                base: self.clone(),
                factor,
            },
            kind,
        )
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn eval_lambda(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.dim(), x.len())?;
        finite_or_eval_error(self.map.apply(t, x))
    }

    pub fn dlambda(&self, t: f64, x: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.dim(), x.len())?;
        check_len(self.dim(), h.len())?;
        finite_or_eval_error(self.map.directional(t, x, h))
    }

    pub fn dlambda_adjoint(&self, t: f64, x: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.dim(), x.len())?;
        check_len(self.dim(), w.len())?;
        finite_or_eval_error(self.map.adjoint(t, x, w))
    }

    pub fn jacobian(&self, t: f64, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len(self.dim(), x.len())?;
        let j = self.map.jacobian(t, x);
        if j.iter().all(|v| v.is_finite()) {
            Ok(j)
        } else {
            Err(Error::OperatorEval { step: None })
        }
    }
}

fn finite_or_eval_error(v: DVector<f64>) -> Result<DVector<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::OperatorEval { step: None })
    }
}

/// One failed sample of a condition check.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub sample: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub h: Option<Vec<f64>>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of a sampled hypothesis check.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub name: String,
    pub samples: usize,
    pub violations: Vec<Violation>,
    pub fitted_constants: BTreeMap<String, f64>,
    pub note: String,
}

const SAMPLER_NOTE: &str =
    "constants fitted on random samples; a finite sampler can falsify the condition but cannot prove it";

impl ConditionReport {
    pub fn new(name: &str, samples: usize) -> Self {
        Self {
            name: name.to_string(),
            samples,
            violations: Vec::new(),
            fitted_constants: BTreeMap::new(),
            note: SAMPLER_NOTE.to_string(),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn fit(&mut self, key: &str, value: f64) {
        if value.is_finite() {
            self.fitted_constants.insert(key.to_string(), value);
        }
    }
}

/// Draws `x = r·ξ` with `ξ` uniform on the unit sphere and `r` log-uniform
/// in `[1e-2, 1e2]`, and `t` uniform on the horizon.
pub struct StateSampler {
    rng: ChaCha8Rng,
    dim: usize,
    t0: f64,
    t1: f64,
}

impl StateSampler {
    pub const LOG_RADIUS: (f64, f64) = (-2.0, 2.0);

    pub fn new(seed: u64, dim: usize, t0: f64, t1: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            dim,
            t0,
            t1,
        }
    }

    pub fn direction(&mut self) -> DVector<f64> {
        loop {
            let xi = DVector::from_fn(self.dim, |_, _| self.rng.sample::<f64, _>(StandardNormal));
            let n = xi.norm();
            if n > 1e-12 {
                return xi / n;
            }
        }
    }

    pub fn radius(&mut self) -> f64 {
        let (lo, hi) = Self::LOG_RADIUS;
        10f64.powf(self.rng.random_range(lo..=hi))
    }

    /// `(radius, r·ξ)`.
    pub fn state(&mut self) -> (f64, DVector<f64>) {
        let r = self.radius();
        (r, self.direction() * r)
    }

    pub fn time(&mut self) -> f64 {
        if self.t1 > self.t0 {
            self.rng.random_range(self.t0..=self.t1)
        } else {
            self.t0
        }
    }
}

/// Largest per-sample `ĝ` (with `μ̂ = 1`) accepted before a sample counts as
/// a blow-up trend.
pub const MONOTONICITY_BLOWUP: f64 = 1e6;

/// Samples `⟨h, λ{DΨ_t(λx+h) − DΨ_t(λx)} + DΛ_t(x)·h⟩` against `‖T·h‖²_H`.
///
/// Per sample the certificate is `max(0, −lhs/‖T·h‖²_H)`, the smallest value
/// of `ĝ·(‖x‖^q + μ̂)` that covers it. `ĝ` is reported with `μ̂ = 1`, and a
/// sample whose own `ĝ` exceeds [`MONOTONICITY_BLOWUP`] is a violation. The
/// normalization by `‖x‖^q + 1` is the growth the condition itself allows.
pub fn check_monotonicity(problem: &ProblemSpec, lambda: Lambda, samples: usize, seed: u64) -> ConditionReport {
    let mut report = ConditionReport::new("monotonicity", samples);
    let n = problem.dim();
    let mut sampler = StateSampler::new(seed, n, problem.t0, problem.t1);
    let draws: Vec<(f64, DVector<f64>, DVector<f64>)> = (0..samples)
        .map(|_| {
            let t = sampler.time();
            let (_, x) = sampler.state();
            let (_, h) = sampler.state();
            (t, x, h)
        })
        .collect();
    let lam = lambda.factor();
    let q = problem.meta.q;

    let evals: Vec<Option<(f64, f64, f64)>> = draws
        .par_iter()
        .map(|(t, x, h)| {
            let mut v = problem.lambda_op.dlambda(*t, x, h).ok()?;
            if lam != 0.0 {
                let base = x * lam;
                let d1 = problem.potential.grad_psi(*t, &(&base + h)).ok()?;
                let d0 = problem.potential.grad_psi(*t, &base).ok()?;
                v += (d1 - d0) * lam;
            }
            let lhs = h.dot(&v);
            let th = problem.triple.apply_t(h).ok()?;
            let th2 = problem.triple.h_norm_sq(&th).ok()?;
            let xq = problem.triple.x_norm(x).ok()?.powf(q);
            Some((lhs, th2, xq))
        })
        .collect();

    let mut cert_max = 0.0f64;
    let mut g_hat = 0.0f64;
    for (i, ev) in evals.into_iter().enumerate() {
        let (t, x, h) = &draws[i];
        match ev {
            Some((lhs, th2, xq)) if lhs.is_finite() && th2 > 0.0 => {
                let cert = (-lhs / th2).max(0.0);
                let g_sample = cert / (xq + 1.0);
                cert_max = cert_max.max(cert);
                g_hat = g_hat.max(g_sample);
                if g_sample > MONOTONICITY_BLOWUP {
                    report.violations.push(Violation {
                        sample: i,
                        t: *t,
                        x: x.as_slice().to_vec(),
                        h: Some(h.as_slice().to_vec()),
                        lhs,
                        rhs: -MONOTONICITY_BLOWUP * (xq + 1.0) * th2,
                    });
                }
            }
            _ => report.violations.push(Violation {
                sample: i,
                t: *t,
                x: x.as_slice().to_vec(),
                h: Some(h.as_slice().to_vec()),
                lhs: f64::NAN,
                rhs: 0.0,
            }),
        }
    }
    report.fit("certificate_max", cert_max);
    report.fit("g_hat", g_hat);
    report.fit("mu_hat", 1.0);
    report
}

/// Samples `Ψ_t(x) + ⟨x, Λ_t(x)⟩ ≥ (1/C̃)‖x‖_X^q − μ̄(‖T·x‖²_H + 1)`.
///
/// Fitting: the lower-order constant is taken as twice the worst quadratic
/// deficit `max (−lhs)⁺/‖T·x‖²_H` over samples with `r ≤ 1`; `1/C̃` is the
/// worst normalized margin over samples with `r ≥ 10`. A non-positive margin
/// there means the negativity outgrows the quadratic term and is reported as
/// a violation. `μ̄` is then refitted over all samples for the chosen `C̃`.
pub fn check_coercivity(problem: &ProblemSpec, samples: usize, seed: u64) -> ConditionReport {
    let mut report = ConditionReport::new("coercivity", samples);
    if samples == 0 {
        return report;
    }
    let n = problem.dim();
    let q = problem.meta.q;
    let mut sampler = StateSampler::new(seed, n, problem.t0, problem.t1);
    let draws: Vec<(f64, f64, DVector<f64>)> = (0..samples)
        .map(|_| {
            let t = sampler.time();
            let (r, x) = sampler.state();
            (t, r, x)
        })
        .collect();

    // (lhs, ‖x‖_X^q, ‖Tx‖²_H)
    let evals: Vec<Option<(f64, f64, f64)>> = draws
        .par_iter()
        .map(|(t, _, x)| {
            let psi = problem.potential.eval_psi(*t, x).ok()?;
            let lam = problem.lambda_op.eval_lambda(*t, x).ok()?;
            let lhs = psi + x.dot(&lam);
            let b = problem.triple.x_norm(x).ok()?.powf(q);
            let tx = problem.triple.apply_t(x).ok()?;
            let s = problem.triple.h_norm_sq(&tx).ok()?;
            Some((lhs, b, s))
        })
        .collect();

    let mut mu_inner = 0.0f64;
    for (i, ev) in evals.iter().enumerate() {
        if let Some((a, _, s)) = ev {
            if draws[i].1 <= 1.0 && *s > 0.0 {
                mu_inner = mu_inner.max((-a).max(0.0) / s);
            }
        }
    }
    mu_inner *= 2.0;

    let outer: Vec<usize> = {
        let o: Vec<usize> = (0..samples).filter(|&i| draws[i].1 >= 10.0).collect();
        if o.is_empty() {
            (0..samples).collect()
        } else {
            o
        }
    };
    let mut alpha = f64::INFINITY;
    for &i in &outer {
        match evals[i] {
            Some((a, b, s)) if a.is_finite() => {
                if b <= 1e-300 {
                    continue;
                }
                let margin = (a + mu_inner * (s + 1.0)) / b;
                alpha = alpha.min(margin);
                if margin <= 0.0 {
                    let (t, _, x) = &draws[i];
                    report.violations.push(Violation {
                        sample: i,
                        t: *t,
                        x: x.as_slice().to_vec(),
                        h: None,
                        lhs: a,
                        rhs: -mu_inner * (s + 1.0),
                    });
                }
            }
            _ => {
                let (t, _, x) = &draws[i];
                report.violations.push(Violation {
                    sample: i,
                    t: *t,
                    x: x.as_slice().to_vec(),
                    h: None,
                    lhs: f64::NAN,
                    rhs: 0.0,
                });
            }
        }
    }
    if alpha > 0.0 && alpha.is_finite() && report.violations.is_empty() {
        let mut mu_bar = 0.0f64;
        for (a, b, s) in evals.iter().flatten() {
            mu_bar = mu_bar.max((alpha * b - a).max(0.0) / (s + 1.0));
        }
        report.fit("C_tilde", 1.0 / alpha);
        report.fit("mu_bar", mu_bar);
    } else {
        report.fit("mu_bar", mu_inner);
    }
    report
}
