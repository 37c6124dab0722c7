use std::f64::consts::PI;

use proptest::prelude::*;
use sambe_core::evolution::{
    corrected_sweep, default_xi_set, effective_propagator, exact_propagator, fluctuation, long_time_check,
    periodized_propagator, truncated_propagator, truncated_propagator_by_action, truncation_bound, truncation_sweep,
    wavepacket_error, EvolutionExperiment, PacketSpec,
};
use sambe_core::linalg::{pauli_combination, unitarity_defect, unitary_exp, ComplexMatrix, C64};
use sambe_core::replica::{effective_2x2, ReplicaModel};

const ORACLE_TOL: f64 = 1e-12;

fn model(m: f64, eps: f64) -> ReplicaModel {
    ReplicaModel::new(0, m, eps).unwrap()
}

#[test]
fn oracle_limits() {
    let xi = [0.3, -0.4];
    let free = model(1.0, 0.1).with_eps(0.0);
    let u = exact_propagator(&free, xi, 2.0, ORACLE_TOL).unwrap();
    let reference = unitary_exp(&pauli_combination(0.3, -0.4, 0.0), 2.0).unwrap();
    assert!((&u - &reference).op_norm() <= 1e-10);
    let id = exact_propagator(&model(1.0, 0.1), xi, 0.0, ORACLE_TOL).unwrap();
    assert!((&id - &ComplexMatrix::identity(2)).max_abs() == 0.0);
    let driven = exact_propagator(&model(0.4, 0.2), xi, 5.0, 1e-10).unwrap();
    assert!(unitarity_defect(&driven) <= 100.0 * 1e-10);
}

#[test]
fn oracle_agrees_with_eleven_replicas() {
    let m = model(1.0, 0.05);
    let u = exact_propagator(&m, [0.2, 0.0], 2.0 * PI, ORACLE_TOL).unwrap();
    let v = truncated_propagator(&m, [0.2, 0.0], 2.0 * PI, 5).unwrap();
    assert!((&u - &v).op_norm() <= 1e-6);
}

#[test]
fn zero_truncation_is_free_evolution() {
    let m = model(0.3, 0.2);
    let u = truncated_propagator(&m, [0.7, 0.1], 1.3, 0).unwrap();
    let reference = unitary_exp(&pauli_combination(0.7, 0.1, 0.0), 1.3).unwrap();
    assert!((&u - &reference).op_norm() <= 1e-13);
}

#[test]
fn truncation_error_slopes_and_bounds() {
    for n in 0..=3 {
        let exp = EvolutionExperiment {
            model: model(1.0, 0.05),
            xi_set: default_xi_set(),
            tau: 1.0,
            eps_sweep: vec![0.02, 0.04, 0.08],
            n_trunc: n,
            oracle_tol: ORACLE_TOL,
        };
        let r = truncation_sweep(&exp).unwrap();
        assert!((r.slope - (n as f64 + 1.0)).abs() <= 0.1, "n={n}: slope {}", r.slope);
        assert!(r.violations.is_empty(), "{:?}", r.violations);
    }
}

#[test]
fn bound_holds_over_full_grid() {
    for n in 0..=3 {
        for tau in [0.5, PI, 2.0 * PI] {
            let exp = EvolutionExperiment {
                model: model(-1.0, 0.1),
                xi_set: default_xi_set(),
                tau,
                eps_sweep: vec![0.025, 0.05, 0.1],
                n_trunc: n,
                oracle_tol: ORACLE_TOL,
            };
            let r = truncation_sweep(&exp).unwrap();
            assert!(r.violations.is_empty(), "n={n} tau={tau}: {:?}", r.violations);
        }
    }
}

#[test]
fn first_order_bound_at_hand_point() {
    let m = model(1.0, 0.1);
    let u = exact_propagator(&m, [0.2, 0.0], 1.0, ORACLE_TOL).unwrap();
    let v = truncated_propagator(&m, [0.2, 0.0], 1.0, 0).unwrap();
    assert!((&u - &v).op_norm() <= 0.4);
}

#[test]
fn periodized_identities() {
    let m = model(1.0, 0.1);
    let xi = [0.4, 0.2];
    let one = truncated_propagator(&m, xi, 2.0 * PI, 1).unwrap();
    let two = periodized_propagator(&m, xi, 4.0 * PI, 1).unwrap();
    assert!((&two - &(&one * &one)).max_abs() <= 1e-12);
    let short = periodized_propagator(&m, xi, 2.5, 2).unwrap();
    assert_eq!(short, truncated_propagator(&m, xi, 2.5, 2).unwrap());
    let zero = periodized_propagator(&m, xi, 0.0, 2).unwrap();
    assert!((&zero - &ComplexMatrix::identity(2)).max_abs() <= 1e-14);
}

#[test]
fn long_time_envelope_constant() {
    let eps: f64 = 0.05;
    let check = long_time_check(&model(1.0, eps), &default_xi_set(), eps.powf(-1.5), 1, 1e-11).unwrap();
    assert!((check.reference_constant - 8.0 * PI).abs() < 1e-12);
    assert!(check.fitted_constant <= check.reference_constant, "{check:?}");
}

#[test]
fn effective_limits() {
    let m = model(0.6, 0.1);
    let (u, fl) = effective_propagator(&m, [0.3, 0.3], 0.0).unwrap();
    assert!((&u - &ComplexMatrix::identity(2)).max_abs() <= 1e-15);
    assert!(fl.max_abs() <= 1e-15);
    let (u, fl) = effective_propagator(&m, [0.3, 0.3], 2.0 * PI).unwrap();
    let reference = unitary_exp(&effective_2x2(&m, [0.3, 0.3]), 2.0 * PI).unwrap();
    assert!((&u - &reference).max_abs() <= 1e-14);
    assert!(fl.max_abs() <= 1e-14);
}

#[test]
fn fluctuation_corrector_raises_the_rate() {
    let eps = [0.01, 0.02, 0.04, 0.08];
    let m = model(1.0, 0.05);
    let with = corrected_sweep(&m, &eps, 0.5, 1.0, PI, ORACLE_TOL, true).unwrap();
    let without = corrected_sweep(&m, &eps, 0.5, 1.0, PI, ORACLE_TOL, false).unwrap();
    assert!(with.slope >= 1.4, "corrected slope {}", with.slope);
    assert!((without.slope - 1.0).abs() <= 0.1, "uncorrected slope {}", without.slope);
}

#[test]
fn wavepacket_rate() {
    let eps = [0.01, 0.02, 0.04, 0.08];
    let errors: Vec<f64> = eps
        .iter()
        .map(|&e| wavepacket_error(&model(1.0, e), &PacketSpec::gaussian(0.8), PI, ORACLE_TOL).unwrap())
        .collect();
    let slope = sambe_core::numeric::loglog_slope(&eps, &errors);
    assert!(slope >= 1.65, "slope {slope}");
}

#[test]
fn wavepacket_limits() {
    let m = model(1.0, 0.05);
    assert!(wavepacket_error(&m, &PacketSpec::gaussian(0.8), 0.0, ORACLE_TOL).unwrap() <= 1e-14);
    assert!(wavepacket_error(&m, &PacketSpec::gaussian(0.0), PI, ORACLE_TOL).is_err());
    // A very narrow packet sees only the ξ = 0 mode.
    let narrow = wavepacket_error(&m, &PacketSpec::gaussian(8.0), PI, ORACLE_TOL).unwrap();
    let exact = exact_propagator(&m, [0.0, 0.0], PI, ORACLE_TOL).unwrap();
    let (u, fl) = effective_propagator(&m, [0.0, 0.0], PI).unwrap();
    let diff = &(&exact - &u) - &fl.scale(C64::new(0.05, 0.0));
    let v = diff.mul_vec(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let single = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    assert!((narrow - single).abs() <= 1e-6 * single.max(1e-12), "{narrow} vs {single}");
}

#[test]
fn fluctuation_is_periodic() {
    let m = model(-0.3, 0.1);
    assert!(fluctuation(&m, 0.0).max_abs() == 0.0);
    assert!((&fluctuation(&m, 1.1) - &fluctuation(&m, 1.1 + 2.0 * PI)).max_abs() <= 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn truncated_norm_stays_near_one(
        n in 0usize..=3,
        eps in 0.01f64..0.1,
        tau in 0.0f64..(2.0 * PI),
        m in -1.0f64..=1.0,
        r in 0.0f64..3.0,
        th in 0.0f64..(2.0 * PI),
    ) {
        let model = model(m, eps);
        let xi = [r * th.cos(), r * th.sin()];
        let u = truncated_propagator(&model, xi, tau, n).unwrap();
        let b_norm = sambe_core::replica::coupling_matrix(m).op_norm();
        prop_assert!(u.op_norm() <= 1.0 + truncation_bound(n, eps, tau, b_norm) + 1e-12);
        let by_action = truncated_propagator_by_action(&model, xi, tau, n).unwrap();
        prop_assert!((&u - &by_action).max_abs() <= 1e-12);
    }
}
