mod common;

use evolve_core::applications::{build_heat, scalar_decay};
use evolve_core::{energy, energy_gradient, OperatorKind, Trajectory};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn energy_is_nonnegative_on_random_trajectories() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut problems = common::small_builders();
    problems.push(scalar_decay());
    for p in &problems {
        for i in 0..1000 {
            let sigma = [0.01, 0.3, 3.0][i % 3];
            let t = common::random_trajectory(p, 3, &mut rng, sigma);
            let j = energy(p, &t).unwrap();
            assert!(j >= -1e-8, "{}: J = {j:e}", p.meta.name);
        }
    }
}

#[test]
fn directional_derivatives_match_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for p in common::small_builders() {
        let n = p.dim();
        for _ in 0..20 {
            let x = common::normal(&mut rng, n);
            let h = common::normal(&mut rng, n);
            let s = 1e-6;
            let fd = (p.lambda_op.eval_lambda(0.3, &(&x + &h * s)).unwrap()
                - p.lambda_op.eval_lambda(0.3, &(&x - &h * s)).unwrap())
                / (2.0 * s);
            let d = p.lambda_op.dlambda(0.3, &x, &h).unwrap();
            let rel = (&d - &fd).amax() / fd.amax().max(1e-12);
            assert!(rel < 1e-5, "{}: {rel:e}", p.meta.name);

            // The adjoint is the transpose of the directional derivative.
            let w = common::normal(&mut rng, n);
            let lhs = w.dot(&d);
            let rhs = p.lambda_op.dlambda_adjoint(0.3, &x, &w).unwrap().dot(&h);
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{}", p.meta.name);
        }
    }
}

#[test]
fn skew_builders_are_skew() {
    use evolve_core::applications::{
        build_hyperbolic, build_schrodinger, pair_operator, HyperbolicCoefficients, SchrodingerCouplings,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for p in [
        build_hyperbolic(16, HyperbolicCoefficients::default()).unwrap(),
        build_schrodinger(16, SchrodingerCouplings::default()).unwrap(),
    ] {
        assert_eq!(p.lambda_op.kind(), OperatorKind::Skew);
        let op = pair_operator(&p);
        for _ in 0..50 {
            let h = common::normal(&mut rng, p.dim());
            let v = h.dot(&op.eval_lambda(0.0, &h).unwrap());
            assert!(v.abs() < 1e-10 * h.norm_squared(), "{}: {v:e}", p.meta.name);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_central_differences_on_heat(noise in prop::collection::vec(-1.0f64..1.0, 6 * 4)) {
        let p = build_heat(6).unwrap();
        let base = Trajectory::constant_extension(&p, 4).unwrap();
        let x = base.free_vector() + DVector::from_vec(noise);
        let traj = base.from_free_vector(&x).unwrap();
        let g = energy_gradient(&p, &traj).unwrap();
        let flat = DVector::from_iterator(x.len(), g.iter().flat_map(|v| v.iter().copied()));
        let s = 1e-6 * (1.0 + x.norm());
        let mut xp = x.clone();
        for j in 0..x.len() {
            xp[j] = x[j] + s;
            let jp = energy(&p, &base.from_free_vector(&xp).unwrap()).unwrap();
            xp[j] = x[j] - s;
            let jm = energy(&p, &base.from_free_vector(&xp).unwrap()).unwrap();
            xp[j] = x[j];
            let fd = (jp - jm) / (2.0 * s);
            prop_assert!((flat[j] - fd).abs() <= 1e-5 * flat.amax().max(1e-8));
        }
    }

    #[test]
    fn scalar_decay_energy_is_nonnegative(states in prop::collection::vec(-50.0f64..50.0, 5)) {
        let p = scalar_decay();
        let base = Trajectory::constant_extension(&p, 5).unwrap();
        let t = base.from_free_vector(&DVector::from_vec(states)).unwrap();
        prop_assert!(energy(&p, &t).unwrap() >= -1e-8);
    }
}
