use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Uniform Dirichlet grid on `[0, 1]` with `n` interior nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1d {
    pub n: usize,
    pub h: f64,
}

impl Grid1d {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Input(format!("need at least 3 interior points, got {n}")));
        }
        Ok(Self {
            n,
            h: 1.0 / (n as f64 + 1.0),
        })
    }

    /// `x_i = (i + 1)·h`.
    pub fn nodes(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| (i as f64 + 1.0) * self.h)
    }

    /// `(n+1)×n` backward difference scaled by `1/h`; the zero boundary
    /// values are folded in.
    pub fn gradient(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n + 1, self.n);
        for i in 0..self.n {
            g[(i, i)] = 1.0 / self.h;
            g[(i + 1, i)] = -1.0 / self.h;
        }
        g
    }

    /// `Δ_h = −GᵀG`, the three-point Laplacian.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let g = self.gradient();
        -g.tr_mul(&g)
    }

    /// `(n+1)×n` average of the two nodes adjacent to each cell.
    pub fn averaging(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n + 1, self.n);
        for i in 0..self.n {
            a[(i, i)] = 0.5;
            a[(i + 1, i)] = 0.5;
        }
        a
    }

    /// `sin(π·x_i)`.
    pub fn sine_mode(&self) -> DVector<f64> {
        self.nodes().map(|x| (std::f64::consts::PI * x).sin())
    }
}

pub(crate) fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut(a.shape(), b.shape()).copy_from(b);
    out
}

/// `[M 0]` or `[0 M]` acting on a two-block state.
pub(crate) fn on_block(m: &DMatrix<f64>, n: usize, second: bool) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), 2 * n);
    let col = if second { n } else { 0 };
    out.view_mut((0, col), m.shape()).copy_from(m);
    out
}
