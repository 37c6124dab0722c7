use proptest::prelude::*;
use sambe_core::replica::{bloch_hamiltonian, ReplicaModel};
use sambe_core::linalg::eigvals_hermitian;
use sambe_core::ribbon::{
    build_ribbon, edge_spectrum, spectral_flow, spectral_flow_conductivity, FlowOptions, LocalPerturbation,
    MassProfile, ProfileShape, RibbonGrid, RibbonKind, RibbonModel,
};
use sambe_core::Error;

fn effective(eps: f64, half_length: f64, points: usize) -> RibbonModel {
    RibbonModel::new(
        RibbonKind::Effective,
        0,
        eps,
        MassProfile::tanh(1.0, 1.0).unwrap(),
        RibbonGrid::new(half_length, points).unwrap(),
    )
    .unwrap()
}

#[test]
fn profiles_are_odd_and_bounded() {
    for shape in [ProfileShape::Tanh, ProfileShape::Erf] {
        let p = MassProfile::new(shape, 0.8, 1.5).unwrap();
        for y in [0.1, 0.7, 2.0, 9.0] {
            assert!((p.value(-y) + p.value(y)).abs() < 1e-15);
            assert!(p.value(y).abs() <= 0.8);
        }
        let y0 = p.plateau_radius();
        assert!(p.value(y0) >= 0.8 * 0.995);
    }
    assert!(MassProfile::tanh(1.5, 1.0).is_err());
    assert!(RibbonGrid::new(10.0, 15).is_err());
}

#[test]
fn constant_mass_reproduces_bulk_bands() {
    let grid = RibbonGrid::new(5.0, 16).unwrap();
    let profile = MassProfile::new(ProfileShape::Constant, 0.7, 1.0).unwrap();
    let model = RibbonModel::new(RibbonKind::Replica, 1, 0.2, profile, grid).unwrap();
    let bulk = ReplicaModel::new(1, 0.7, 0.2).unwrap();
    for xi_x in [0.0, 0.35, -1.2] {
        let mut ribbon = eigvals_hermitian(&build_ribbon(&model, xi_x)).unwrap();
        let mut reference: Vec<f64> = grid
            .wavenumbers()
            .into_iter()
            .flat_map(|k| eigvals_hermitian(&bloch_hamiltonian(&bulk, [xi_x, k])).unwrap())
            .collect();
        ribbon.sort_by(f64::total_cmp);
        reference.sort_by(f64::total_cmp);
        for (a, b) in ribbon.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ribbon_is_hermitian(n in 0usize..=1, eps in 0.05f64..0.5, m0 in 0.2f64..1.0, w in 0.5f64..1.2, xi_x in -2.0f64..2.0, seed in 0u64..1000) {
        let grid = RibbonGrid::new(30.0, 20).unwrap();
        let model = RibbonModel::new(RibbonKind::Replica, n, eps, MassProfile::tanh(m0, w).unwrap(), grid)
            .unwrap()
            .with_perturbation(LocalPerturbation { seed, amplitude: eps * eps / 4.0, center: 0.3, radius: 2.0 });
        let h = build_ribbon(&model, xi_x);
        prop_assert!(h.hermitian_defect() <= 1e-12 * h.frobenius_norm());
    }
}

#[test]
fn effective_ribbon_has_one_zero_pair_per_interface() {
    let model = effective(0.3, 60.0, 64);
    let spectrum = edge_spectrum(&model, &[0.0], 0.5 * model.bulk_half_gap()).unwrap();
    let at_one: Vec<_> = spectrum.states.iter().filter(|s| s.interface == 1).collect();
    let at_two: Vec<_> = spectrum.states.iter().filter(|s| s.interface == 2).collect();
    assert_eq!(at_one.len(), 1, "{spectrum:?}");
    assert_eq!(at_two.len(), 1, "{spectrum:?}");
    let mut energies: Vec<f64> = spectrum.states.iter().map(|s| s.energy).collect();
    energies.sort_by(f64::total_cmp);
    assert!(energies[0] <= 0.0 && energies[1] >= 0.0);
    assert!(energies.iter().all(|e| e.abs() < 1e-3));
    for s in &spectrum.states {
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn effective_branches_have_opposite_velocities() {
    let model = effective(0.3, 60.0, 64);
    let grid = [-0.03, 0.03];
    let spectrum = edge_spectrum(&model, &grid, 0.75 * model.bulk_half_gap()).unwrap();
    let energy = |x: f64, iface: u8| {
        spectrum.states.iter().find(|s| s.xi_x == x && s.interface == iface).map(|s| s.energy).unwrap()
    };
    let v1 = energy(0.03, 1) - energy(-0.03, 1);
    let v2 = energy(0.03, 2) - energy(-0.03, 2);
    assert!(v1 * v2 < 0.0);
}

#[test]
fn window_limits() {
    let model = effective(0.3, 60.0, 64);
    let empty = edge_spectrum(&model, &[0.0, 0.1], 0.0).unwrap();
    assert!(empty.states.is_empty());
    match edge_spectrum(&model, &[0.0], 0.2) {
        Err(Error::WindowOutsideGap { bulk_gap, .. }) => assert!((bulk_gap - 0.09).abs() < 1e-12),
        other => panic!("expected window rejection, got {other:?}"),
    }
}

#[test]
fn effective_flow_at_both_interfaces() {
    let model = effective(0.3, 60.0, 64);
    let opts = FlowOptions::for_model(&model);
    let report = spectral_flow(&model, &opts).unwrap();
    assert_eq!(report.at(1), -1);
    assert_eq!(report.at(2), 1);
    assert_eq!(report.conductivity.iter().sum::<i64>(), 0);
    assert_eq!(spectral_flow_conductivity(&model, &opts, 1).unwrap(), -1);
    assert!(spectral_flow_conductivity(&model, &opts, 3).is_err());
}

#[test]
fn effective_flow_survives_local_perturbation_and_erf_profile() {
    let base = effective(0.3, 60.0, 64);
    let perturbed = base.with_perturbation(LocalPerturbation { seed: 11, amplitude: 0.09 / 4.0, center: 0.5, radius: 3.0 });
    let erf = base.with_profile(MassProfile::new(ProfileShape::Erf, 1.0, 1.0).unwrap());
    for model in [perturbed, erf] {
        let report = spectral_flow(&model, &FlowOptions::for_model(&model)).unwrap();
        assert_eq!(report.conductivity, [-1, 1]);
    }
}

#[test]
fn tracking_failure_is_reported() {
    let model = effective(0.3, 60.0, 64);
    let opts = FlowOptions { overlap_threshold: 1.1, max_depth: 2, ..FlowOptions::for_model(&model) };
    assert!(matches!(spectral_flow(&model, &opts), Err(Error::TrackingAmbiguity { .. })));
}
