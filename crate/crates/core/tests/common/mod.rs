#![allow(dead_code)]

use evolve_core::applications::{
    build_hyperbolic, build_navier_stokes_2d, build_parabolic_divergence, build_parabolic_nondivergence,
    build_schrodinger, DivergenceCoefficients, HyperbolicCoefficients, NondivergenceCoefficients, Nonlinearity,
    NsForcing, NsInitial, PairNonlinearity, SchrodingerCouplings,
};
use evolve_core::{ProblemSpec, Trajectory};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn normal(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Constant extension plus Gaussian noise of size `sigma` on the free states.
pub fn random_trajectory(p: &ProblemSpec, m: usize, rng: &mut ChaCha8Rng, sigma: f64) -> Trajectory {
    let base = Trajectory::constant_extension(p, m).unwrap();
    let free = (1..=m).map(|k| base.state(k) + normal(rng, p.dim()) * sigma).collect();
    base.with_free_states(free).unwrap()
}

/// One small instance of every builder, with nonlinear closures switched on.
pub fn small_builders() -> Vec<ProblemSpec> {
    let tanh = |amp| Nonlinearity::Tanh { amp };
    vec![
        build_parabolic_divergence(
            8,
            2.0,
            DivergenceCoefficients {
                theta: tanh(0.5),
                xi: tanh(0.3),
                gamma: Nonlinearity::Linear { c: 0.2 },
            },
        )
        .unwrap(),
        build_parabolic_divergence(
            8,
            4.0,
            DivergenceCoefficients {
                theta: Nonlinearity::SaturatedCubic { c: 0.4 },
                ..DivergenceCoefficients::default()
            },
        )
        .unwrap(),
        build_parabolic_nondivergence(
            8,
            4.0,
            NondivergenceCoefficients {
                theta: tanh(0.4),
                gamma: Nonlinearity::SaturatedCubic { c: 0.3 },
            },
        )
        .unwrap(),
        build_hyperbolic(
            6,
            HyperbolicCoefficients {
                upsilon: Nonlinearity::Linear { c: 0.5 },
                theta: tanh(0.5),
                xi: tanh(0.2),
            },
        )
        .unwrap(),
        build_schrodinger(
            6,
            SchrodingerCouplings {
                theta: PairNonlinearity::SaturatedCubic { cu: 0.3, cv: 0.1 },
                xi: PairNonlinearity::Linear { a: 0.2, b: -0.1 },
            },
        )
        .unwrap(),
        build_navier_stokes_2d(
            8,
            0.1,
            &NsForcing::Kolmogorov { m: 1, amp: 0.5 },
            &NsInitial::TaylorGreen { amplitude: 1.0 },
        )
        .unwrap()
        .problem,
    ]
}
