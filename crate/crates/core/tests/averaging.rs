use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sambe_core::averaging::*;
use sambe_core::linalg::{ode_propagate, pauli, vec_norm, ComplexMatrix, C64, ZERO};
use sambe_core::ribbon::{MassProfile, RibbonGrid};
use sambe_core::Error;

// Bessel values J₀(1) and J₁(1) from standard tables.
const BESSEL_J0_1: f64 = 0.765_197_686_557_966_6;
const BESSEL_J1_1: f64 = 0.440_050_585_744_933_5;

fn grid() -> RibbonGrid {
    RibbonGrid::new(24.0, 128).unwrap()
}

fn slope_profile() -> MassProfile {
    MassProfile::tanh(1.0, 2.0).unwrap()
}

fn second_harmonic(a: f64, b: f64) -> DriveProfile {
    DriveProfile { f1_sin: vec![0.0, a], f1_cos: Vec::new(), f0_sin: vec![0.0, b], f0_cos: Vec::new() }
}

fn packet() -> GridPacket {
    GridPacket { center: 0.0, width: 2.0, spinor: [C64::new(1.0, 0.0), ZERO] }
}

#[test]
fn odd_drive_has_vanishing_cross_averages() {
    let data = effective_data(&DriveProfile::sinusoidal(0.5, 1.0), 1024).unwrap();
    assert!(data.b_avg[1][0].abs() <= 1e-12, "b21 = {:e}", data.b_avg[1][0]);
    assert!(data.b_avg[0][1].abs() <= 1e-12, "b12 = {:e}", data.b_avg[0][1]);
    // Dirac-with-mass form: Y only in σ₂, M only in σ₃.
    assert!(data.y_pauli[0].abs() <= 1e-10 && data.y_pauli[2].abs() <= 1e-10);
    assert!(data.m_pauli[0].abs() <= 1e-10 && data.m_pauli[1].abs() <= 1e-10);
}

#[test]
fn sinusoidal_drive_averages_match_bessel_values() {
    for b in [1.0, -0.5] {
        let data = effective_data(&DriveProfile::sinusoidal(0.5, b), 1024).unwrap();
        assert!((data.h_y - BESSEL_J0_1).abs() <= 1e-12, "h_y = {}", data.h_y);
        assert!((data.mass_coefficient - b * BESSEL_J1_1).abs() <= 1e-12, "mass = {}", data.mass_coefficient);
        assert!((data.det_b + b * BESSEL_J0_1 * BESSEL_J1_1).abs() <= 1e-12);
    }
    // Quadrature is already converged at 256 nodes.
    let coarse = effective_data(&DriveProfile::sinusoidal(0.5, 1.0), 256).unwrap();
    assert!((coarse.h_y - BESSEL_J0_1).abs() <= 1e-13);
    assert!(matches!(effective_data(&DriveProfile::sinusoidal(0.5, 1.0), 64), Err(Error::InvalidInput(_))));
}

#[test]
fn zero_drive_is_degenerate() {
    let data = effective_data(&DriveProfile::zero(), 512).unwrap();
    assert!((&data.y_matrix() - &pauli(2)).max_abs() <= 1e-15);
    assert!(data.m_matrix().max_abs() <= 1e-15);
    assert!(data.det_b == 0.0 && data.degenerate);
    assert!(matches!(effective_conductivity_sign(&data, 1.0), Err(Error::DegenerateDrive(_))));
}

#[test]
fn conductivity_sign_is_odd_in_each_argument() {
    let mut data = effective_data(&DriveProfile::sinusoidal(0.5, -1.0), 512).unwrap();
    assert!(data.det_b > 0.0);
    assert_eq!(effective_conductivity_sign(&data, 1.0).unwrap(), -1);
    assert_eq!(effective_conductivity_sign(&data, -1.0).unwrap(), 1);
    data.det_b = -data.det_b;
    assert_eq!(effective_conductivity_sign(&data, 1.0).unwrap(), 1);
    assert!(matches!(effective_conductivity_sign(&data, 0.0), Err(Error::DegenerateDrive(_))));
}

#[test]
fn fast_unitary_solves_the_fast_equation() {
    let drive = DriveProfile::sinusoidal(0.5, 1.0);
    for v in [-1.3, 0.0, 2.1] {
        let ode = ode_propagate(
            |tau| {
                let mut h = pauli(1).scale(C64::new(drive.f1(tau), 0.0));
                let shift = ComplexMatrix::identity(2).scale(C64::new(drive.f0(tau) * v, 0.0));
                h = &h + &shift;
                h
            },
            0.0,
            0.37,
            1e-12,
        )
        .unwrap();
        let closed = fast_unitary(&drive, v, 0.37);
        assert!((&ode - &closed).max_abs() <= 1e-8);
    }
}

#[test]
fn rotated_hamiltonian_reduces_to_dirac_when_drive_vanishes() {
    let model = AveragingModel::new(DriveProfile::sinusoidal(0.5, 1.0), slope_profile(), grid(), 0.3).unwrap();
    // F₁ = F₀ = 0 at τ = 1/2.
    let h = rotated_hamiltonian(&model, 0.5).unwrap();
    let d = model.grid.derivative_matrix();
    let n = model.grid.points;
    let expected = ComplexMatrix::from_fn(2 * n, |r, c| {
        let kinetic = pauli(2)[(r % 2, c % 2)] * d[(r / 2, c / 2)];
        let mass = if r / 2 == c / 2 { pauli(1)[(r % 2, c % 2)] * 0.3 } else { ZERO };
        kinetic + mass
    });
    assert!((&h - &expected).max_abs() <= 1e-12);
}

#[test]
fn rotated_hamiltonian_matches_conjugated_dirac_operator() {
    let drive = DriveProfile::sinusoidal(0.5, 1.0);
    let model = AveragingModel::new(drive.clone(), slope_profile(), grid(), 0.3).unwrap();
    let n = model.grid.points;
    let states: Vec<Vec<C64>> = [(-3.0, [1.0, 0.0]), (0.0, [0.6, 0.8]), (5.0, [0.0, 1.0])]
        .iter()
        .map(|&(c, s)| {
            GridPacket { center: c, width: 2.5, spinor: [C64::new(s[0], 0.0), C64::new(0.0, s[1])] }.values(&model.grid)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let tau: f64 = rng.gen();
        for psi in &states {
            let defect = conjugation_defect(&model, tau, psi).unwrap();
            assert!(defect <= 1e-8, "τ = {tau}: {defect:e}");
        }
    }

    // Cross-check the matrix-free residual against explicitly conjugated matrices at one τ.
    let v = model.potential_values();
    let d = model.grid.derivative_matrix();
    let free = ComplexMatrix::from_fn(2 * n, |r, c| {
        let kinetic = pauli(2)[(r % 2, c % 2)] * d[(r / 2, c / 2)];
        let mass = if r / 2 == c / 2 { pauli(1)[(r % 2, c % 2)] * 0.3 } else { ZERO };
        kinetic + mass
    });
    let tau = 0.3;
    let u = ComplexMatrix::from_fn(2 * n, |r, c| {
        if r / 2 == c / 2 {
            fast_unitary(&drive, v[r / 2], tau)[(r % 2, c % 2)]
        } else {
            ZERO
        }
    });
    let conjugated = &(&u.adjoint() * &free) * &u;
    let rotated = rotated_hamiltonian(&model, tau).unwrap();
    let diff: Vec<C64> =
        conjugated.mul_vec(&states[1]).iter().zip(rotated.mul_vec(&states[1])).map(|(x, y)| x - y).collect();
    assert!((vec_norm(&diff) - conjugation_defect(&model, tau, &states[1]).unwrap()).abs() <= 1e-12);
}

#[test]
fn period_average_of_rotated_hamiltonian_is_the_effective_operator() {
    let drive = DriveProfile::sinusoidal(0.5, 1.0);
    let model = AveragingModel::new(drive.clone(), slope_profile(), RibbonGrid::new(24.0, 48).unwrap(), 0.3);
    // 48 points do not resolve v' to the Nyquist tolerance.
    assert!(matches!(model, Err(Error::InvalidInput(_))));
    let model = AveragingModel::new(drive.clone(), slope_profile(), grid(), 0.3).unwrap();
    let samples = 1024;
    let dim = 2 * model.grid.points;
    let mut sum = ComplexMatrix::zeros(dim);
    for j in 0..samples {
        sum = &sum + &rotated_hamiltonian(&model, j as f64 / samples as f64).unwrap();
    }
    let average = sum.scale(C64::new(1.0 / samples as f64, 0.0));
    let effective = averaged_hamiltonian(&model, &effective_data(&drive, 1024).unwrap());
    assert!((&average - &effective).max_abs() <= 1e-8);
}

#[test]
fn averaging_error_is_first_order_in_eps() {
    let model = AveragingModel::new(second_harmonic(0.5, 1.0), slope_profile(), grid(), 0.3).unwrap();
    let eps = [0.02, 0.04, 0.08];
    let errors = averaging_error(&model, &eps, 1.0, &packet()).unwrap();
    let slope = averaging_rate(&eps, &errors);
    assert!((slope - 1.0).abs() <= 0.15, "slope {slope}, errors {errors:?}");

    let later = averaging_error(&model, &[0.04], 2.0, &packet()).unwrap();
    let ratio = later[0] / errors[1];
    assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");

    let start = averaging_error(&model, &[0.04], 0.0, &packet()).unwrap();
    assert_eq!(start[0], 0.0);
}

#[test]
fn sign_formula_matches_ribbon_flow() {
    for b in [1.0, -1.0] {
        let drive = DriveProfile::sinusoidal(0.5, b);
        let data = effective_data(&drive, 1024).unwrap();
        let predicted = effective_conductivity_sign(&data, 1.0).unwrap();
        let flow = ribbon_cross_check(&drive, slope_profile(), grid()).unwrap();
        assert_eq!(flow, predicted, "b = {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn odd_drives_have_vanishing_cross_averages(
        a in proptest::collection::vec(-1.0f64..1.0, 1..4),
        b in proptest::collection::vec(-1.0f64..1.0, 1..4),
    ) {
        let drive = DriveProfile { f1_sin: a, f1_cos: Vec::new(), f0_sin: b, f0_cos: Vec::new() };
        prop_assert!(drive.odd_about_half());
        let data = effective_data(&drive, 512).unwrap();
        prop_assert!(data.b_avg[0][1].abs() <= 1e-12);
        prop_assert!(data.b_avg[1][0].abs() <= 1e-12);
    }

    #[test]
    fn fast_unitary_is_periodic(tau in -2.0f64..2.0, v in -5.0f64..5.0) {
        let drive = DriveProfile { f1_sin: vec![0.5, 0.2], f1_cos: vec![0.3], f0_sin: vec![1.0], f0_cos: vec![0.0, -0.4] };
        let u = fast_unitary(&drive, v, tau);
        let shifted = fast_unitary(&drive, v, tau + 1.0);
        prop_assert!((&u - &shifted).max_abs() <= 1e-12);
        let defect = (&(&u.adjoint() * &u) - &ComplexMatrix::identity(2)).max_abs();
        prop_assert!(defect <= 1e-14);
    }
}
