use proptest::prelude::*;
use sambe_core::linalg::eigvals_hermitian;
use sambe_core::numeric::loglog_slope;
use sambe_core::replica::{
    band_structure, bloch_hamiltonian, effective_2x2, midgap_coupling, ring_coupling_constant, ring_gap, ReplicaModel,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_symmetric_about_zero(n in 0usize..=3, m in -1.0f64..=1.0, eps in 0.01f64..=0.5,
                                     x in -4.0f64..4.0, y in -4.0f64..4.0) {
        let model = ReplicaModel::new(n, m, eps).unwrap();
        let ev = eigvals_hermitian(&bloch_hamiltonian(&model, [x, y])).unwrap();
        let d = ev.len();
        for k in 0..d {
            prop_assert!((ev[k] + ev[d - 1 - k]).abs() <= 1e-10);
        }
    }

    #[test]
    fn diagonal_blocks_shift_by_mode_index(n in 1usize..=3, m in -1.0f64..=1.0, eps in 0.01f64..=0.5,
                                           x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let model = ReplicaModel::new(n, m, eps).unwrap();
        let h = bloch_hamiltonian(&model, [x, y]);
        let reference = h.block(0, 0, 2);
        for a in 1..model.replicas() {
            let mut b = h.block(2 * a, 2 * a, 2);
            b[(0, 0)] += a as f64;
            b[(1, 1)] += a as f64;
            prop_assert!((&b - &reference).max_abs() <= 1e-15);
        }
    }

    #[test]
    fn effective_model_at_zero_coupling_is_single_replica(x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let model = ReplicaModel::new(0, 1.0, 1e-300_f64.max(f64::MIN_POSITIVE)).unwrap();
        let a = effective_2x2(&model, [x, y]);
        let b = bloch_hamiltonian(&model, [x, y]);
        prop_assert!((&a - &b).max_abs() <= 1e-15);
    }
}

#[test]
fn dirac_cone_line_cut() {
    let model = ReplicaModel::new(0, 1.0, 0.1).unwrap();
    let grid: Vec<[f64; 2]> = (0..=40).map(|i| [-2.0 + 0.1 * i as f64, 0.0]).collect();
    let bands = band_structure(&model, &grid).unwrap();
    for (xi, sheet) in grid.iter().zip(&bands.sheets) {
        assert!((sheet[1] - xi[0].abs()).abs() < 1e-14 && (sheet[0] + xi[0].abs()).abs() < 1e-14);
    }
    assert!(bands.gap_at_zero[20] < 1e-14);
}

#[test]
fn five_replica_line_cut_has_minima_near_integers() {
    let model = ReplicaModel::new(2, 1.0, 0.1).unwrap();
    let grid: Vec<[f64; 2]> = (0..=500).map(|i| [0.005 * i as f64, 0.0]).collect();
    let bands = band_structure(&model, &grid).unwrap();
    for ell in 0..=2usize {
        let lo = if ell == 0 { 0 } else { 200 * ell - 100 };
        let hi = (200 * ell + 100).min(500);
        let (arg, _) = (lo..=hi)
            .map(|i| (i, bands.gap_at_zero[i]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let r = grid[arg][0];
        assert!((r - ell as f64).abs() < 0.05, "ring {ell} minimum at {r}");
    }
}

#[test]
fn ring_one_gap_scales_as_eps_squared() {
    let eps = [0.02, 0.04, 0.08];
    let gaps: Vec<f64> = eps
        .iter()
        .map(|&e| ring_gap(&ReplicaModel::new(1, 1.0, e).unwrap(), 1).unwrap().gap)
        .collect();
    let slope = loglog_slope(&eps, &gaps);
    assert!((slope - 2.0).abs() <= 0.1, "slope {slope}");
}

#[test]
fn ring_gaps_at_eps_one_tenth() {
    let model = ReplicaModel::new(1, 1.0, 0.1).unwrap();
    let central = ring_gap(&model, 0).unwrap();
    assert!((central.gap - 0.02).abs() <= 0.1 * 0.02, "{central:?}");
    assert!(central.location < 1e-3);
    // The first ring closes to ε²c with c(1) = 1, i.e. half the naive 2ε²c estimate.
    let ring = ring_gap(&model, 1).unwrap();
    assert!((ring.gap - 0.01).abs() <= 0.05 * 0.01, "{ring:?}");
    assert!((ring.location - 1.0).abs() < 0.01);
}

#[test]
fn ring_two_gap_scales_as_eps_fourth() {
    let eps = [0.05, 0.1, 0.2];
    let gaps: Vec<f64> = eps
        .iter()
        .map(|&e| ring_gap(&ReplicaModel::new(2, 1.0, e).unwrap(), 2).unwrap().gap)
        .collect();
    let slope = loglog_slope(&eps, &gaps);
    assert!((slope - 4.0).abs() <= 0.2, "slope {slope}");
    let predicted = 0.05f64.powi(4) * ring_coupling_constant(2, 2.0);
    assert!((gaps[0] / predicted - 1.0).abs() < 0.1, "gap {} vs {}", gaps[0], predicted);
}

#[test]
fn ring_beyond_truncation_rejected() {
    assert!(ring_gap(&ReplicaModel::new(1, 1.0, 0.1).unwrap(), 2).is_err());
}

fn winding_of_coupling(model: &ReplicaModel, ell: usize) -> f64 {
    let samples = 64;
    let mut total = 0.0;
    let r = ell as f64;
    let mut prev = midgap_coupling(model, [r, 0.0], ell).unwrap().arg();
    for i in 1..=samples {
        let th = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
        let cur = midgap_coupling(model, [r * th.cos(), r * th.sin()], ell).unwrap().arg();
        let mut d = cur - prev;
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        total += d;
        prev = cur;
    }
    total / (2.0 * std::f64::consts::PI)
}

#[test]
fn midgap_coupling_modulus_and_winding() {
    for &m in &[1.0, -1.0] {
        for ell in 1..=2usize {
            let model = ReplicaModel::new(2, m, 0.02).unwrap();
            let eta = midgap_coupling(&model, [ell as f64, 0.0], ell).unwrap();
            // The unit-normalised zero modes carry a factor ½ relative to c(ξ).
            let expected = 0.5 * ring_coupling_constant(ell, ell as f64);
            assert!((eta.norm() / expected - 1.0).abs() < 0.05, "m={m} l={ell}: |eta|={}", eta.norm());
            let w = winding_of_coupling(&model, ell);
            assert!((w - 2.0 * m * ell as f64).abs() < 1e-6, "m={m} l={ell}: winding {w}");
        }
    }
}
