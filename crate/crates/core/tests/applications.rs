mod common;

use evolve_core::applications::{
    build_heat, build_hyperbolic, build_navier_stokes_2d, build_schrodinger, exact_heat_solution, Grid1d,
    HyperbolicCoefficients, Nonlinearity, NsForcing, NsInitial, PairNonlinearity, SchrodingerCouplings,
};
use evolve_core::{
    check_coercivity, check_monotonicity, energy_balance_audit, implicit_euler_solve, OracleOptions, Trajectory,
};
use nalgebra::DVector;

fn h_energy(p: &evolve_core::ProblemSpec, u: &DVector<f64>) -> f64 {
    0.5 * p.triple.h_norm_sq(&p.triple.apply_t(u).unwrap()).unwrap()
}

#[test]
fn exact_heat_midpoint_value() {
    let n = 63;
    let sol = exact_heat_solution(n, 10, 0.1).unwrap();
    let grid = Grid1d::new(n).unwrap();
    let mid = grid.nodes().iter().position(|&x| (x - 0.5).abs() < 1e-12).unwrap();
    for k in 0..=10 {
        let expect = (-std::f64::consts::PI.powi(2) * sol.time(k)).exp();
        assert!((sol.state(k)[mid] - expect).abs() < 1e-14);
    }
}

#[test]
fn linear_heat_step_takes_one_newton_iteration() {
    let p = build_heat(16).unwrap();
    let sol = implicit_euler_solve(&p, 10, &OracleOptions::default()).unwrap();
    assert!(sol.newton_iters.iter().all(|&i| i <= 1), "{:?}", sol.newton_iters);
}

#[test]
fn wave_energy_is_non_increasing_and_damping_helps() {
    let undamped = build_hyperbolic(32, HyperbolicCoefficients::default()).unwrap();
    let damped = build_hyperbolic(
        32,
        HyperbolicCoefficients {
            upsilon: Nonlinearity::Linear { c: 1.0 },
            ..HyperbolicCoefficients::default()
        },
    )
    .unwrap();
    let m = 100;
    let a = implicit_euler_solve(&undamped, m, &OracleOptions::default())
        .unwrap()
        .trajectory;
    let b = implicit_euler_solve(&damped, m, &OracleOptions::default())
        .unwrap()
        .trajectory;
    let ea: Vec<f64> = a.states().iter().map(|u| h_energy(&undamped, u)).collect();
    assert!(ea.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let (fa, fb) = (ea[m], h_energy(&damped, b.final_state()));
    let (a0, b0) = (ea[0], h_energy(&damped, b.state(0)));
    assert!(fb / b0 < fa / a0, "damped {} vs undamped {}", fb / b0, fa / a0);
}

#[test]
fn schrodinger_swap_symmetry() {
    let p = build_schrodinger(16, SchrodingerCouplings::default()).unwrap();
    let n = 16;
    let m = 40;
    let swap = |x: &DVector<f64>| DVector::from_fn(2 * n, |i, _| if i < n { x[i + n] } else { -x[i - n] });
    let q = p.clone().with_initial(swap(&p.initial)).unwrap();
    let a = implicit_euler_solve(&p, m, &OracleOptions::default())
        .unwrap()
        .trajectory;
    let b = implicit_euler_solve(&q, m, &OracleOptions::default())
        .unwrap()
        .trajectory;
    for k in 0..=m {
        assert!((swap(a.state(k)) - b.state(k)).amax() < 1e-10);
    }
}

#[test]
fn schrodinger_saturated_cubic_runs() {
    let p = build_schrodinger(
        32,
        SchrodingerCouplings {
            theta: PairNonlinearity::SaturatedCubic { cu: 0.0, cv: 1.0 },
            xi: PairNonlinearity::SaturatedCubic { cu: -1.0, cv: 0.0 },
        },
    )
    .unwrap();
    let sol = implicit_euler_solve(&p, 100, &OracleOptions::default()).unwrap();
    let e = energy_balance_audit(&p, &sol.trajectory).unwrap();
    assert!(e.iter().all(|v| v.is_finite()));
}

#[test]
fn navier_stokes_forced_flow_is_divergence_free() {
    let ns = build_navier_stokes_2d(
        16,
        0.05,
        &NsForcing::Kolmogorov { m: 2, amp: 1.0 },
        &NsInitial::RandomModes { seed: 3, energy: 0.5 },
    )
    .unwrap();
    assert_eq!(ns.problem.dim(), 120);
    let sol = implicit_euler_solve(&ns.problem, 20, &OracleOptions::default()).unwrap();
    for a in sol.trajectory.states() {
        assert!(ns.basis.divergence_on_grid(a).amax() < 1e-10);
    }
}

#[test]
fn navier_stokes_unforced_energy_balance_is_dissipative() {
    let ns = build_navier_stokes_2d(
        16,
        0.1,
        &NsForcing::None,
        &NsInitial::RandomModes { seed: 9, energy: 1.0 },
    )
    .unwrap();
    let sol = implicit_euler_solve(&ns.problem, 20, &OracleOptions::default()).unwrap();
    let e = energy_balance_audit(&ns.problem, &sol.trajectory).unwrap();
    assert!(e.iter().all(|&v| v <= 1e-12));
    let dims = build_navier_stokes_2d(32, 0.1, &NsForcing::None, &NsInitial::TaylorGreen { amplitude: 1.0 }).unwrap();
    assert_eq!(dims.problem.dim(), 440);
}

#[test]
fn heat_checks_pass_and_trajectory_csv_round_trips() {
    let p = build_heat(8).unwrap();
    assert!(check_monotonicity(&p, p.lambda_flag, 300, 1).passed());
    let c = check_coercivity(&p, 300, 2);
    assert!(c.passed());
    assert!(c.fitted_constants.values().all(|v| v.is_finite()));

    let sol = implicit_euler_solve(&p, 5, &OracleOptions::default()).unwrap();
    let mut buf = Vec::new();
    sol.trajectory.write_csv(&mut buf).unwrap();
    let back = Trajectory::read_csv(&p.triple, buf.as_slice()).unwrap();
    assert_eq!(back.max_distance(&sol.trajectory).unwrap(), 0.0);
}
