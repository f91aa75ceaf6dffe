//! Finite-dimensional evolution triple `X ⊂ H ⊂ X*`.
//!
//! States live in coefficient space `R^n`. The dual space is identified with
//! the same coefficient space through the Euclidean pairing, and the `H`
//! geometry is carried entirely by an SPD mass matrix. The inclusion
//! `T: X → H` is a square injective matrix, `T̃ = Tᵀ·mass`, and `I = T̃∘T`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// How `‖x‖_X` is measured.
#[derive(Debug, Clone, PartialEq)]
pub enum XNorm {
    /// Plain Euclidean norm of the coefficient vector.
    Euclidean,
    /// `(weight · Σ_j |(G·x)_j|^q)^(1/q)` for a linear image `G`.
    Power { image: DMatrix<f64>, q: f64, weight: f64 },
    /// Sum of several norms, e.g. `‖Δx‖_q + ‖∇x‖_2`.
    Sum(Vec<XNorm>),
}

impl XNorm {
    pub fn power(image: DMatrix<f64>, q: f64, weight: f64) -> Self {
        XNorm::Power { image, q, weight }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            XNorm::Euclidean => x.norm(),
            XNorm::Power { image, q, weight } => {
                let gx = image * x;
                let s: f64 = gx.iter().map(|v| v.abs().powf(*q)).sum();
                (weight * s).powf(1.0 / q)
            }
            XNorm::Sum(parts) => parts.iter().map(|p| p.eval(x)).sum(),
        }
    }

    fn columns(&self) -> Option<usize> {
        match self {
            XNorm::Euclidean => None,
            XNorm::Power { image, .. } => Some(image.ncols()),
            XNorm::Sum(parts) => parts.iter().find_map(|p| p.columns()),
        }
    }

    fn stacked_image(&self, dim: usize) -> DMatrix<f64> {
        match self {
            XNorm::Euclidean => DMatrix::identity(dim, dim),
            XNorm::Power { image, .. } => image.clone(),
            XNorm::Sum(parts) => {
                let blocks: Vec<_> = parts.iter().map(|p| p.stacked_image(dim)).collect();
                let rows = blocks.iter().map(|b| b.nrows()).sum();
                let mut out = DMatrix::zeros(rows, dim);
                let mut r = 0;
                for b in blocks {
                    out.view_mut((r, 0), (b.nrows(), dim)).copy_from(&b);
                    r += b.nrows();
                }
                out
            }
        }
    }

    /// Whether `‖x‖_X = 0` forces `x = 0`.
    pub fn is_definite(&self, dim: usize) -> bool {
        let g = self.stacked_image(dim);
        if g.nrows() < dim {
            return false;
        }
        let sv = g.singular_values();
        let max = sv.max();
        sv.min() > 1e-12 * max.max(1.0)
    }
}

/// The triple `{X, H, X*}` with its inclusion maps.
#[derive(Debug, Clone)]
pub struct EvolutionTriple {
    mass: DMatrix<f64>,
    t_map: DMatrix<f64>,
    xnorm: XNorm,
    t_tilde: DMatrix<f64>,
    gram: DMatrix<f64>,
    t_inv: DMatrix<f64>,
}

impl EvolutionTriple {
    /// Validates SPD mass, injective `T` and norm dimensions.
    pub fn new(mass: DMatrix<f64>, t_map: DMatrix<f64>, xnorm: XNorm) -> Result<Self> {
        let n = mass.nrows();
        if n == 0 || mass.ncols() != n {
            return Err(Error::Input("mass must be a non-empty square matrix".into()));
        }
        check_len(n, t_map.nrows())?;
        check_len(n, t_map.ncols())?;
        if let Some(c) = xnorm.columns() {
            check_len(n, c)?;
        }
        let scale = mass.amax().max(f64::MIN_POSITIVE);
        if (&mass - mass.transpose()).amax() > 1e-12 * scale {
            return Err(Error::Input("mass matrix is not symmetric".into()));
        }
        let eig = mass.clone().symmetric_eigen();
        if eig.eigenvalues.min() <= 1e-14 * scale {
            return Err(Error::Input("mass matrix is not positive definite".into()));
        }
        let t_inv = t_map
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Input("inclusion T is not injective".into()))?;
        let t_tilde = t_map.transpose() * &mass;
        let gram = &t_tilde * &t_map;
        let gram = (&gram + gram.transpose()) * 0.5;
        Ok(Self {
            mass,
            t_map,
            xnorm,
            t_tilde,
            gram,
            t_inv,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n), DMatrix::identity(n, n), XNorm::Euclidean).expect("identity triple is valid")
    }

    /// `T = id` with the given SPD mass and X-norm.
    pub fn with_mass(mass: DMatrix<f64>, xnorm: XNorm) -> Result<Self> {
        let n = mass.nrows();
        Self::new(mass, DMatrix::identity(n, n), xnorm)
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn t_map(&self) -> &DMatrix<f64> {
        &self.t_map
    }

    pub fn xnorm(&self) -> &XNorm {
        &self.xnorm
    }

    /// The matrix of `I = T̃∘T`.
    pub fn inclusion(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `⟨x, f⟩_{X×X*}`.
    pub fn pairing(&self, x: &DVector<f64>, f: &DVector<f64>) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        check_len(self.dim(), f.len())?;
        Ok(x.dot(f))
    }

    /// `⟨w1, w2⟩_H = w1ᵀ·mass·w2`.
    pub fn h_inner(&self, w1: &DVector<f64>, w2: &DVector<f64>) -> Result<f64> {
        check_len(self.dim(), w1.len())?;
        check_len(self.dim(), w2.len())?;
        Ok(w1.dot(&(&self.mass * w2)))
    }

    pub fn h_norm_sq(&self, w: &DVector<f64>) -> Result<f64> {
        self.h_inner(w, w)
    }

    pub fn apply_t(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.dim(), x.len())?;
        Ok(&self.t_map * x)
    }

    pub fn apply_t_tilde(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.dim(), w.len())?;
        Ok(&self.t_tilde * w)
    }

    /// `(T·x, I·x)` with `I·x` computed as `T̃·(T·x)`.
    pub fn apply_inclusions(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let tx = self.apply_t(x)?;
        let ix = &self.t_tilde * &tx;
        Ok((tx, ix))
    }

    /// `I·x` via the assembled Gram matrix.
    pub fn apply_i(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gram * x
    }

    pub fn x_norm(&self, x: &DVector<f64>) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        Ok(self.xnorm.eval(x))
    }

    /// False when the X-norm has a kernel (e.g. a difference map without boundary rows).
    pub fn xnorm_is_definite(&self) -> bool {
        self.xnorm.is_definite(self.dim())
    }

    /// The X-representative `u₀` of an H-datum, i.e. `T·u₀ = w₀`.
    pub fn lift(&self, w0: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.dim(), w0.len())?;
        Ok(&self.t_inv * w0)
    }

    /// Same triple with the mass multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.mass * c, self.t_map.clone(), self.xnorm.clone())
    }
}
