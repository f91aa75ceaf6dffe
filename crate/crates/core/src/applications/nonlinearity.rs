use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Globally Lipschitz pointwise closure `s ↦ f(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    Zero,
    /// `c·s`
    Linear { c: f64 },
    /// `amp·tanh(s)`
    Tanh { amp: f64 },
    /// `c·s³/(1 + s²)`
    SaturatedCubic { c: f64 },
}

impl Nonlinearity {
    pub fn is_zero(&self) -> bool {
        match *self {
            Nonlinearity::Zero => true,
            Nonlinearity::Linear { c } | Nonlinearity::SaturatedCubic { c } => c == 0.0,
            Nonlinearity::Tanh { amp } => amp == 0.0,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { c } => c * s,
            Nonlinearity::Tanh { amp } => amp * s.tanh(),
            Nonlinearity::SaturatedCubic { c } => c * s * s * s / (1.0 + s * s),
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { c } => c,
            Nonlinearity::Tanh { amp } => {
                let c = s.cosh();
                amp / (c * c)
            }
            Nonlinearity::SaturatedCubic { c } => {
                let s2 = s * s;
                c * s2 * (3.0 + s2) / ((1.0 + s2) * (1.0 + s2))
            }
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        v.map(|s| self.value(s))
    }

    pub fn apply_deriv(&self, v: &DVector<f64>) -> DVector<f64> {
        v.map(|s| self.deriv(s))
    }
}

/// Globally Lipschitz pointwise closure `(u, v) ↦ f(u, v)` for coupled pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairNonlinearity {
    #[default]
    Zero,
    /// `a·u + b·v`
    Linear { a: f64, b: f64 },
    /// `(cu·u + cv·v)·ρ/(1 + ρ)` with `ρ = u² + v²`.
    SaturatedCubic { cu: f64, cv: f64 },
}

impl PairNonlinearity {
    pub fn is_zero(&self) -> bool {
        match *self {
            PairNonlinearity::Zero => true,
            PairNonlinearity::Linear { a, b } => a == 0.0 && b == 0.0,
            PairNonlinearity::SaturatedCubic { cu, cv } => cu == 0.0 && cv == 0.0,
        }
    }

    pub fn value(&self, u: f64, v: f64) -> f64 {
        match *self {
            PairNonlinearity::Zero => 0.0,
            PairNonlinearity::Linear { a, b } => a * u + b * v,
            PairNonlinearity::SaturatedCubic { cu, cv } => {
                let rho = u * u + v * v;
                (cu * u + cv * v) * rho / (1.0 + rho)
            }
        }
    }

    /// `(∂f/∂u, ∂f/∂v)`.
    pub fn partials(&self, u: f64, v: f64) -> (f64, f64) {
        match *self {
            PairNonlinearity::Zero => (0.0, 0.0),
            PairNonlinearity::Linear { a, b } => (a, b),
            PairNonlinearity::SaturatedCubic { cu, cv } => {
                let rho = u * u + v * v;
                let f = rho / (1.0 + rho);
                let fp = 1.0 / ((1.0 + rho) * (1.0 + rho));
                let s = cu * u + cv * v;
                (cu * f + 2.0 * s * fp * u, cv * f + 2.0 * s * fp * v)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_differences() {
        let fs = [
            Nonlinearity::Linear { c: -1.5 },
            Nonlinearity::Tanh { amp: 2.0 },
            Nonlinearity::SaturatedCubic { c: 0.7 },
        ];
        for f in fs {
            for &s in &[-3.0, -0.4, 0.0, 0.9, 5.0] {
                let h = 1e-6;
                let fd = (f.value(s + h) - f.value(s - h)) / (2.0 * h);
                assert!((fd - f.deriv(s)).abs() < 1e-7, "{f:?} at {s}");
            }
        }
        let p = PairNonlinearity::SaturatedCubic { cu: 1.0, cv: -0.5 };
        for &(u, v) in &[(0.3, -1.2), (2.0, 0.5), (0.0, 0.0)] {
            let h = 1e-6;
            let (du, dv) = p.partials(u, v);
            assert!(((p.value(u + h, v) - p.value(u - h, v)) / (2.0 * h) - du).abs() < 1e-7);
            assert!(((p.value(u, v + h) - p.value(u, v - h)) / (2.0 * h) - dv).abs() < 1e-7);
        }
    }
}
