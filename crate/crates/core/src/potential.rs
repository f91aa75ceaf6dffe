//! Convex potentials `Ψ_t`, their gradients and Legendre conjugates.
//!
//! Every potential is `Ψ_t(x) = a(t)·Ψ(x)` with a base potential `Ψ` and a
//! positive time factor `a(t)`. The duality gap is evaluated in Bregman form,
//! `Ψ(x) − Ψ(z) − ⟨x − z, y⟩` with `z` the Legendre argmax of `y`, which keeps
//! it free of cancellation when `y` is close to `DΨ(x)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_finite, check_len, Error, Result};
use crate::operator::{ConditionReport, StateSampler, Violation};
use crate::triple::EvolutionTriple;

/// User-supplied convex potential.
pub trait CustomPotential: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// Damped Newton settings for the numerical conjugate.
#[derive(Debug, Clone, Copy)]
pub struct ConjugateOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub hessian_shift: f64,
}

impl Default for ConjugateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
            max_halvings: 60,
            hessian_shift: 1e-14,
        }
    }
}

#[derive(Clone)]
pub enum PotentialKind {
    /// `Ψ ≡ 0`. Its conjugate is finite only at the origin.
    Zero,
    /// `½·xᵀ·A·x` with SPD `A`.
    Quadratic {
        a: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
    },
    /// `Σ_i w_i·|x_i|^q / q`.
    PointwisePower {
        q: f64,
        weights: Option<DVector<f64>>,
    },
    /// `(w/q)·Σ_j |(G·x)_j|^q`.
    ComposedPower {
        image: DMatrix<f64>,
        q: f64,
        weight: f64,
    },
    Custom(Arc<dyn CustomPotential>),
}

impl fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::Zero => write!(f, "Zero"),
            PotentialKind::Quadratic { a, .. } => write!(f, "Quadratic({}x{})", a.nrows(), a.ncols()),
            PotentialKind::PointwisePower { q, .. } => write!(f, "PointwisePower(q={q})"),
            PotentialKind::ComposedPower { image, q, weight } => write!(
                f,
                "ComposedPower({}x{}, q={q}, weight={weight})",
                image.nrows(),
                image.ncols()
            ),
            PotentialKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

type Modulation = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `Ψ_t = scale · m(t) · Ψ`.
#[derive(Clone)]
pub struct Potential {
    kind: PotentialKind,
    scale: f64,
    modulation: Option<Modulation>,
    conj: ConjugateOptions,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("kind", &self.kind)
            .field("scale", &self.scale)
            .field("time_dependent", &self.modulation.is_some())
            .finish()
    }
}

impl Potential {
    fn from_kind(kind: PotentialKind) -> Self {
        Self {
            kind,
            scale: 1.0,
            modulation: None,
            conj: ConjugateOptions::default(),
        }
    }

    pub fn zero() -> Self {
        Self::from_kind(PotentialKind::Zero)
    }

    pub fn quadratic(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Input("quadratic potential needs a square matrix".into()));
        }
        if (&a - a.transpose()).amax() > 1e-12 * a.amax().max(f64::MIN_POSITIVE) {
            return Err(Error::Input("quadratic potential matrix is not symmetric".into()));
        }
        let chol = a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Input("quadratic potential matrix is not positive definite".into()))?;
        Ok(Self::from_kind(PotentialKind::Quadratic { a, chol }))
    }

    pub fn pointwise_power(q: f64, weights: Option<DVector<f64>>) -> Result<Self> {
        if !(q >= 2.0) || !q.is_finite() {
            return Err(Error::Input(format!("power exponent must be >= 2, got {q}")));
        }
        if let Some(w) = &weights {
            if w.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Input("power weights must be positive".into()));
            }
        }
        Ok(Self::from_kind(PotentialKind::PointwisePower { q, weights }))
    }

    pub fn composed_power(image: DMatrix<f64>, q: f64, weight: f64) -> Result<Self> {
        if !(q >= 2.0) || !q.is_finite() {
            return Err(Error::Input(format!("power exponent must be >= 2, got {q}")));
        }
        if !(weight > 0.0) {
            return Err(Error::Input("weight must be positive".into()));
        }
        Ok(Self::from_kind(PotentialKind::ComposedPower { image, q, weight }))
    }

    pub fn custom(p: impl CustomPotential + 'static) -> Self {
        Self::from_kind(PotentialKind::Custom(Arc::new(p)))
    }

    /// Multiplies the potential by a constant `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale *= c;
        out
    }

    /// Multiplies the potential by a positive, continuous `m(t)`.
    pub fn with_modulation(mut self, m: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.modulation = Some(Arc::new(m));
        self
    }

    pub fn with_conjugate_options(mut self, conj: ConjugateOptions) -> Self {
        self.conj = conj;
        self
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }

    /// Time factor `a(t)`.
    pub fn factor(&self, t: f64) -> f64 {
        self.scale * self.modulation.as_ref().map_or(1.0, |m| m(t))
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        match &self.kind {
            PotentialKind::Quadratic { a, .. } => check_len(a.ncols(), x.len()),
            PotentialKind::PointwisePower { weights: Some(w), .. } => check_len(w.len(), x.len()),
            PotentialKind::ComposedPower { image, .. } => check_len(image.ncols(), x.len()),
            _ => Ok(()),
        }
    }

    fn factor_checked(&self, t: f64) -> Result<f64> {
        let a = self.factor(t);
        if a > 0.0 && a.is_finite() {
            Ok(a)
        } else {
            Err(Error::Input(format!(
                "potential time factor must be positive, got {a} at t={t}"
            )))
        }
    }

    pub fn eval_psi(&self, t: f64, x: &DVector<f64>) -> Result<f64> {
        check_finite(x, "potential argument")?;
        self.check_dim(x)?;
        Ok(self.factor_checked(t)? * self.base_value(x))
    }

    pub fn grad_psi(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_finite(x, "potential argument")?;
        self.check_dim(x)?;
        Ok(self.base_gradient(x) * self.factor_checked(t)?)
    }

    /// `D²Ψ_t(x)`; forward differences of the gradient for custom potentials.
    pub fn hessian(&self, t: f64, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_finite(x, "potential argument")?;
        self.check_dim(x)?;
        Ok(self.base_hessian(x) * self.factor_checked(t)?)
    }

    /// `argmax_z ⟨z, y⟩ − Ψ_t(z)`, i.e. the solution of `DΨ_t(z) = y`.
    pub fn legendre_argmax(&self, t: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_finite(y, "conjugate argument")?;
        self.check_dim(y)?;
        let a = self.factor_checked(t)?;
        self.base_argmax(&(y / a))
    }

    pub fn eval_psi_star(&self, t: f64, y: &DVector<f64>) -> Result<f64> {
        check_finite(y, "conjugate argument")?;
        self.check_dim(y)?;
        let a = self.factor_checked(t)?;
        let ys = y / a;
        let z = self.base_argmax(&ys)?;
        Ok(a * self.base_star(&ys, &z))
    }

    /// `Ψ_t(x) + Ψ*_t(y) − ⟨x, y⟩ ≥ 0`.
    pub fn duality_gap(&self, t: f64, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        Ok(self.gap_with_argmax(t, x, y)?.0)
    }

    /// The duality gap together with the argmax `z = DΨ*_t(y)`.
    pub fn gap_with_argmax(&self, t: f64, x: &DVector<f64>, y: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        check_finite(x, "potential argument")?;
        check_finite(y, "conjugate argument")?;
        self.check_dim(x)?;
        check_len(x.len(), y.len())?;
        let a = self.factor_checked(t)?;
        let ys = y / a;
        let z = self.base_argmax(&ys)?;
        let gap = a * self.base_gap(x, &ys, &z);
        Ok((gap, z))
    }

    fn base_value(&self, x: &DVector<f64>) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Quadratic { a, .. } => 0.5 * x.dot(&(a * x)),
            PotentialKind::PointwisePower { q, weights } => x
                .iter()
                .enumerate()
                .map(|(i, v)| weight_at(weights, i) * v.abs().powf(*q) / q)
                .sum(),
            PotentialKind::ComposedPower { image, q, weight } => {
                let gx = image * x;
                weight / q * gx.iter().map(|v| v.abs().powf(*q)).sum::<f64>()
            }
            PotentialKind::Custom(c) => c.value(x),
        }
    }

    fn base_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            PotentialKind::Zero => DVector::zeros(x.len()),
            PotentialKind::Quadratic { a, .. } => a * x,
            PotentialKind::PointwisePower { q, weights } => {
                DVector::from_fn(x.len(), |i, _| weight_at(weights, i) * signed_pow(x[i], q - 1.0))
            }
            PotentialKind::ComposedPower { image, q, weight } => {
                let gx = image * x;
                image.tr_mul(&gx.map(|v| signed_pow(v, q - 1.0))) * *weight
            }
            PotentialKind::Custom(c) => c.gradient(x),
        }
    }

    fn base_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        match &self.kind {
            PotentialKind::Zero => DMatrix::zeros(n, n),
            PotentialKind::Quadratic { a, .. } => a.clone(),
            PotentialKind::PointwisePower { q, weights } => DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| {
                weight_at(weights, i) * (q - 1.0) * x[i].abs().powf(q - 2.0)
            })),
            PotentialKind::ComposedPower { image, q, weight } => {
                let gx = image * x;
                let d = gx.map(|v| weight * (q - 1.0) * v.abs().powf(q - 2.0));
                let mut scaled = image.clone();
                for (mut row, di) in scaled.row_iter_mut().zip(d.iter()) {
                    row *= *di;
                }
                image.tr_mul(&scaled)
            }
            PotentialKind::Custom(c) => {
                let h = 1e-7 * (1.0 + x.norm());
                let g0 = c.gradient(x);
                let mut jac = DMatrix::zeros(n, n);
                let mut xp = x.clone();
                for j in 0..n {
                    xp[j] += h;
                    jac.set_column(j, &((c.gradient(&xp) - &g0) / h));
                    xp[j] = x[j];
                }
                (&jac + jac.transpose()) * 0.5
            }
        }
    }

    fn base_argmax(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.kind {
            PotentialKind::Zero => {
                if y.iter().all(|&v| v == 0.0) {
                    Ok(DVector::zeros(y.len()))
                } else {
                    Err(Error::Input(
                        "conjugate of the zero potential is unbounded away from 0".into(),
                    ))
                }
            }
            PotentialKind::Quadratic { chol, .. } => Ok(chol.solve(y)),
            PotentialKind::PointwisePower { q, weights } => Ok(DVector::from_fn(y.len(), |i, _| {
                signed_pow(y[i] / weight_at(weights, i), 1.0 / (q - 1.0))
            })),
            PotentialKind::ComposedPower { .. } | PotentialKind::Custom(_) => self.newton_argmax(y),
        }
    }

    /// `Ψ*(y)` given the argmax `z`.
    fn base_star(&self, y: &DVector<f64>, z: &DVector<f64>) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Quadratic { .. } => 0.5 * y.dot(z),
            PotentialKind::PointwisePower { q, weights } => {
                let qs = q / (q - 1.0);
                y.iter()
                    .enumerate()
                    .map(|(i, v)| weight_at(weights, i).powf(1.0 - qs) * v.abs().powf(qs) / qs)
                    .sum()
            }
            PotentialKind::ComposedPower { .. } | PotentialKind::Custom(_) => z.dot(y) - self.base_value(z),
        }
    }

    fn base_gap(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> f64 {
        // Exact identity: gap = D_Ψ(x, z) + ⟨x − z, DΨ(z) − y⟩.
        let d = x - z;
        let correction = |grad_z: DVector<f64>| d.dot(&(grad_z - y));
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Quadratic { a, .. } => {
                let ad = a * &d;
                0.5 * d.dot(&ad) + correction(a * z)
            }
            PotentialKind::PointwisePower { q, weights } => {
                let breg: f64 = (0..x.len())
                    .map(|i| weight_at(weights, i) * power_bregman(x[i], z[i], *q))
                    .sum();
                breg + correction(self.base_gradient(z))
            }
            PotentialKind::ComposedPower { image, q, weight } => {
                let gx = image * x;
                let gz = image * z;
                let breg: f64 = gx.iter().zip(gz.iter()).map(|(a, b)| power_bregman(*a, *b, *q)).sum();
                weight * breg + correction(self.base_gradient(z))
            }
            PotentialKind::Custom(_) => self.base_value(x) + self.base_star(y, z) - x.dot(y),
        }
    }

    /// Damped Newton on `φ(z) = Ψ(z) − ⟨z, y⟩`, starting at `z = y`.
    fn newton_argmax(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let opts = self.conj;
        let n = y.len();
        let scale = 1.0 + y.amax();
        let tol = opts.tol * scale;
        let phi = |z: &DVector<f64>| self.base_value(z) - z.dot(y);
        let mut z = y.clone();
        let mut res = self.base_gradient(&z) - y;
        let mut res_norm = res.amax();
        for _ in 0..opts.max_iter {
            if res_norm <= tol {
                return Ok(z);
            }
            let mut hess = self.base_hessian(&z);
            for i in 0..n {
                hess[(i, i)] += opts.hessian_shift;
            }
            let dir = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&(-&res)),
                None => match hess.lu().solve(&(-&res)) {
                    Some(d) => d,
                    None => -&res,
                },
            };
            let slope = res.dot(&dir);
            let dir = if slope < 0.0 { dir } else { -&res };
            let slope = res.dot(&dir);
            let phi0 = phi(&z);
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..=opts.max_halvings {
                let trial = &z + &dir * step;
                let trial_res = self.base_gradient(&trial) - y;
                let trial_norm = trial_res.amax();
                let armijo = phi(&trial) <= phi0 + 1e-4 * step * slope;
                if trial_norm.is_finite() && (armijo || trial_norm < res_norm) {
                    z = trial;
                    res = trial_res;
                    res_norm = trial_norm;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // Round-off floor: no representable step improves further.
                if res_norm <= 1e3 * tol {
                    return Ok(z);
                }
                return Err(Error::ConjugateFailure {
                    iterations: opts.max_iter,
                    residual: res_norm,
                });
            }
        }
        if res_norm <= tol {
            Ok(z)
        } else {
            Err(Error::ConjugateFailure {
                iterations: opts.max_iter,
                residual: res_norm,
            })
        }
    }

    /// Samples the growth condition `(1/C0)‖x‖^q − C0 ≤ Ψ_t(x) ≤ C0‖x‖^q + C0`
    /// and the gradient bound `‖DΨ_t(x)‖ ≤ C̄(‖x‖^{q−1} + 1)`.
    ///
    /// Reports the smallest admissible `C0` seen (`C0_min`) and the fitted `C̄`
    /// (`grad_bound`, Euclidean norm of the gradient coefficients).
    pub fn check_growth(
        &self,
        triple: &EvolutionTriple,
        horizon: (f64, f64),
        samples: usize,
        c0: f64,
        q: f64,
        seed: u64,
    ) -> ConditionReport {
        let mut report = ConditionReport::new("growth", samples);
        let mut sampler = StateSampler::new(seed, triple.dim(), horizon.0, horizon.1);
        let mut c0_min = 0.0f64;
        let mut grad_bound = 0.0f64;
        for i in 0..samples {
            let t = sampler.time();
            let (_, x) = sampler.state();
            let (psi, grad, xn) = match (self.eval_psi(t, &x), self.grad_psi(t, &x), triple.x_norm(&x)) {
                (Ok(p), Ok(g), Ok(n)) => (p, g, n),
                _ => {
                    report.violations.push(Violation {
                        sample: i,
                        t,
                        x: x.as_slice().to_vec(),
                        h: None,
                        lhs: f64::NAN,
                        rhs: f64::NAN,
                    });
                    continue;
                }
            };
            let xq = xn.powf(q);
            let lower = xq / c0 - c0;
            let upper = c0 * xq + c0;
            if psi < lower || psi > upper {
                report.violations.push(Violation {
                    sample: i,
                    t,
                    x: x.as_slice().to_vec(),
                    h: None,
                    lhs: psi,
                    rhs: if psi < lower { lower } else { upper },
                });
            }
            // Smallest C with Ψ ≤ C(‖x‖^q + 1) and ‖x‖^q/C − C ≤ Ψ.
            let c_upper = psi / (xq + 1.0);
            let c_lower = 0.5 * (-psi + (psi * psi + 4.0 * xq).sqrt());
            c0_min = c0_min.max(c_upper).max(c_lower);
            grad_bound = grad_bound.max(grad.norm() / (xn.powf(q - 1.0) + 1.0));
        }
        report.fit("C0_min", c0_min);
        report.fit("grad_bound", grad_bound);
        report
    }
}

fn weight_at(weights: &Option<DVector<f64>>, i: usize) -> f64 {
    weights.as_ref().map_or(1.0, |w| w[i])
}

/// `sign(v)·|v|^p`.
pub(crate) fn signed_pow(v: f64, p: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(p)
    }
}

/// Bregman divergence of `f(s) = |s|^q/q`: `f(a) − f(b) − f'(b)(a − b)`.
///
/// Near `a ≈ b` the binomial series `|b|^q/q · Σ_{j≥2} C(q,j)·x^j` with
/// `x = (a − b)/b` is summed instead of the cancelling closed form.
pub fn power_bregman(a: f64, b: f64, q: f64) -> f64 {
    if q == 2.0 {
        let d = a - b;
        return 0.5 * d * d;
    }
    if b == 0.0 {
        return a.abs().powf(q) / q;
    }
    let x = (a - b) / b;
    if x.abs() < 0.5 {
        let mut term = q * x;
        let mut sum = 0.0;
        for j in 2..400 {
            term *= (q - (j as f64) + 1.0) / (j as f64) * x;
            sum += term;
            if term == 0.0 || term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        (b.abs().powf(q) / q * sum).max(0.0)
    } else {
        let fa = a.abs().powf(q) / q;
        let fb = b.abs().powf(q) / q;
        (fa - fb - signed_pow(b, q - 1.0) * (a - b)).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    fn quad(a: f64) -> Potential {
        Potential::quadratic(DMatrix::from_element(1, 1, a)).unwrap()
    }

    fn quartic() -> Potential {
        Potential::pointwise_power(4.0, None).unwrap()
    }

    struct SoftAbs;
    impl CustomPotential for SoftAbs {
        // Ψ(x) = Σ cosh(x_i) − 1
        fn value(&self, x: &DVector<f64>) -> f64 {
            x.iter().map(|v| v.cosh() - 1.0).sum()
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            x.map(f64::sinh)
        }
    }

    fn diff_matrix(n: usize) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(n + 1, n);
        for i in 0..n {
            g[(i, i)] = 1.0;
            g[(i + 1, i)] = -1.0;
        }
        g
    }

    fn builtins() -> Vec<(&'static str, Potential, usize)> {
        let b = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.5, -0.2, 0.0, -0.2, 1.0]);
        vec![
            ("quadratic", Potential::quadratic(b).unwrap(), 3),
            (
                "pointwise-q3",
                Potential::pointwise_power(3.0, Some(DVector::from_row_slice(&[1.0, 2.0, 0.5]))).unwrap(),
                3,
            ),
            ("pointwise-q4", quartic(), 3),
            (
                "composed-q4",
                Potential::composed_power(diff_matrix(3), 4.0, 0.5).unwrap(),
                3,
            ),
            (
                "composed-q2",
                Potential::composed_power(diff_matrix(3), 2.0, 1.0).unwrap(),
                3,
            ),
        ]
    }

    #[test]
    fn eval_examples() {
        assert_eq!(quad(1.0).eval_psi(0.0, &s(3.0)).unwrap(), 4.5);
        assert_eq!(quartic().eval_psi(0.0, &s(2.0)).unwrap(), 4.0);
        for (_, p, n) in builtins() {
            assert_eq!(p.eval_psi(0.3, &DVector::zeros(n)).unwrap(), 0.0);
        }
        assert!(matches!(
            quartic().eval_psi(0.0, &s(f64::NAN)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn grad_examples() {
        let a = Potential::quadratic(DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_eq!(a.grad_psi(0.0, &s(3.0)).unwrap(), s(6.0));
        assert_eq!(quartic().grad_psi(0.0, &s(2.0)).unwrap(), s(8.0));
        for (_, p, n) in builtins() {
            assert_eq!(p.grad_psi(0.0, &DVector::zeros(n)).unwrap().amax(), 0.0);
        }
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(quad(1.0).eval_psi_star(0.0, &s(3.0)).unwrap(), 4.5);
        assert_relative_eq!(quartic().eval_psi_star(0.0, &s(8.0)).unwrap(), 12.0, epsilon = 1e-12);
        for (_, p, n) in builtins() {
            assert_eq!(p.eval_psi_star(0.0, &DVector::zeros(n)).unwrap(), 0.0);
        }
    }

    #[test]
    fn gap_examples() {
        assert!(quartic().duality_gap(0.0, &s(2.0), &s(8.0)).unwrap().abs() < 1e-12);
        assert_relative_eq!(
            quartic().duality_gap(0.0, &s(1.0), &s(8.0)).unwrap(),
            4.25,
            epsilon = 1e-12
        );
        assert_eq!(quartic().duality_gap(0.0, &s(0.0), &s(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn argmax_examples() {
        assert_relative_eq!(
            quad(2.0).legendre_argmax(0.0, &s(6.0)).unwrap()[0],
            3.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            quartic().legendre_argmax(0.0, &s(8.0)).unwrap()[0],
            2.0,
            epsilon = 1e-14
        );
        assert_eq!(quartic().legendre_argmax(0.0, &s(0.0)).unwrap(), s(0.0));
    }

    #[test]
    fn numerical_argmax_solves_gradient_equation() {
        let p = Potential::composed_power(diff_matrix(4), 4.0, 0.25).unwrap();
        let custom = Potential::custom(SoftAbs);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let y = DVector::from_fn(4, |_, _| rng.random_range(-5.0..5.0));
            for pot in [&p, &custom] {
                let z = pot.legendre_argmax(0.0, &y).unwrap();
                let res = (pot.grad_psi(0.0, &z).unwrap() - &y).amax();
                assert!(res < 1e-10 * (1.0 + y.amax()), "residual {res}");
                assert!(pot.duality_gap(0.0, &z, &y).unwrap().abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_potential_conjugate_is_unbounded() {
        let z = Potential::zero();
        assert_eq!(z.eval_psi_star(0.0, &s(0.0)).unwrap(), 0.0);
        assert!(z.eval_psi_star(0.0, &s(1.0)).is_err());
    }

    #[test]
    fn time_modulation_scales_all_quantities() {
        let p = quartic().with_modulation(|t| 1.0 + t);
        let x = s(1.5);
        assert_relative_eq!(
            p.eval_psi(1.0, &x).unwrap(),
            2.0 * 1.5f64.powi(4) / 4.0,
            epsilon = 1e-12
        );
        let y = p.grad_psi(1.0, &x).unwrap();
        assert!(p.duality_gap(1.0, &x, &y).unwrap().abs() < 1e-12);
        assert_relative_eq!(p.legendre_argmax(1.0, &y).unwrap()[0], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn fenchel_young_holds_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (name, p, n) in builtins() {
            for _ in 0..10_000 {
                let x = DVector::from_fn(n, |_, _| rng.random_range(-4.0..4.0));
                let y = DVector::from_fn(n, |_, _| rng.random_range(-4.0..4.0));
                let gap = p.duality_gap(0.0, &x, &y).unwrap();
                assert!(gap >= -1e-9, "{name}: gap {gap}");
                let g = p.grad_psi(0.0, &x).unwrap();
                let at = p.duality_gap(0.0, &x, &g).unwrap();
                assert!(at.abs() < 1e-8, "{name}: gap at gradient {at}");
            }
        }
    }

    #[test]
    fn gap_matches_naive_formula_away_from_equality() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (name, p, n) in builtins() {
            for _ in 0..200 {
                let x = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
                let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
                let naive = p.eval_psi(0.0, &x).unwrap() + p.eval_psi_star(0.0, &y).unwrap() - x.dot(&y);
                let gap = p.duality_gap(0.0, &x, &y).unwrap();
                assert!(
                    (naive - gap).abs() < 1e-9 * (1.0 + naive.abs()),
                    "{name}: {naive} vs {gap}"
                );
            }
        }
    }

    #[test]
    fn biconjugate_matches_grid_supremum() {
        // sup_z zy − Ψ(z) on a fine grid, scalar closed-form kinds.
        let grid: Vec<f64> = (0..=400_000).map(|i| -20.0 + 40.0 * i as f64 / 400_000.0).collect();
        let kinds = [quad(1.5), quartic(), Potential::pointwise_power(3.0, None).unwrap()];
        for p in kinds {
            for y in [-6.0, -1.3, 0.0, 0.7, 2.5, 9.0] {
                let sup = grid
                    .iter()
                    .map(|&z| z * y - p.eval_psi(0.0, &s(z)).unwrap())
                    .fold(f64::NEG_INFINITY, f64::max);
                let star = p.eval_psi_star(0.0, &s(y)).unwrap();
                assert!((sup - star).abs() < 1e-6, "y={y}: grid {sup} vs {star}");
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut all = builtins();
        all.push(("custom", Potential::custom(SoftAbs), 3));
        for (name, p, n) in all {
            for _ in 0..200 {
                let x = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
                let g = p.grad_psi(0.0, &x).unwrap();
                let h = 1e-5 * (1.0 + x.norm());
                let fd = DVector::from_fn(n, |i, _| {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    (p.eval_psi(0.0, &xp).unwrap() - p.eval_psi(0.0, &xm).unwrap()) / (2.0 * h)
                });
                let rel = (&g - &fd).amax() / g.amax().max(1e-3);
                assert!(rel < 1e-6, "{name}: rel err {rel}");
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (name, p, n) in builtins() {
            let x = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let hess = p.hessian(0.0, &x).unwrap();
            let h = 1e-6;
            for j in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let col = (p.grad_psi(0.0, &xp).unwrap() - p.grad_psi(0.0, &xm).unwrap()) / (2.0 * h);
                assert!((hess.column(j) - col).amax() < 1e-6 * (1.0 + hess.amax()), "{name}");
            }
        }
    }

    #[test]
    fn power_bregman_agrees_with_direct_formula() {
        for &q in &[2.5, 3.0, 4.0, 6.0] {
            for &(a, b) in &[(1.0, 1.2), (-0.7, -0.65), (2.0, -1.0), (0.0, 3.0), (5.0, 0.0)] {
                let f = |s: f64| s.abs().powf(q) / q;
                let direct = f(a) - f(b) - signed_pow(b, q - 1.0) * (a - b);
                assert_relative_eq!(power_bregman(a, b, q), direct, max_relative = 1e-10, epsilon = 1e-14);
            }
            // a ≈ b: second-order behaviour without cancellation
            let b: f64 = 1.3;
            let d = 1e-9;
            let expected = 0.5 * (q - 1.0) * b.powf(q - 2.0) * d * d;
            assert_relative_eq!(power_bregman(b + d, b, q), expected, max_relative = 1e-6);
        }
    }

    #[test]
    fn growth_examples() {
        let tr = EvolutionTriple::identity(1);
        let q2 = Potential::pointwise_power(2.0, None).unwrap();
        // Ψ = x²/2 satisfies both bounds with C0 = 2.
        let rep = q2.check_growth(&tr, (0.0, 1.0), 500, 2.0, 2.0, 1);
        assert!(rep.passed());
        assert_relative_eq!(
            rep.fitted_constants["C0_min"],
            1.0 + 0.0f64.max(0.0),
            max_relative = 0.5
        );
        // With C0 = 1 the lower bound ‖x‖² − 1 ≤ x²/2 fails once x² > 2.
        let rep = q2.check_growth(&tr, (0.0, 1.0), 500, 1.0, 2.0, 1);
        assert!(!rep.passed());
        for v in &rep.violations {
            assert!(v.x[0].abs() > 2f64.sqrt());
            assert!(v.lhs < v.rhs);
        }
        // x⁴/4 declared as q = 2: upper bound fails at |x| = 10.
        let rep = quartic().check_growth(&tr, (0.0, 1.0), 500, 2.0, 2.0, 1);
        assert!(!rep.passed());
        assert!(10f64.powi(4) / 4.0 > 2.0 * 100.0 + 2.0);
        let rep = quartic().check_growth(&tr, (0.0, 1.0), 0, 2.0, 2.0, 1);
        assert!(rep.passed() && rep.samples == 0);
    }
}
