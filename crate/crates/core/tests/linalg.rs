use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sambe_core::linalg::{
    eig_hermitian, eig_hermitian_householder, eig_hermitian_jacobi, eig_hermitian_window, eigvals_hermitian, op_norm,
    unitarity_defect, unitary_exp, ComplexMatrix, EigenSystem, C64,
};

fn random_hermitian(dim: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        a[(i, i)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in i + 1..dim {
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    a
}

fn check_system(a: &ComplexMatrix, es: &EigenSystem) -> Result<(), TestCaseError> {
    let n = a.dim();
    let norm = op_norm(a).max(1e-300);
    for w in es.values.windows(2) {
        prop_assert!(w[0] <= w[1]);
    }
    for k in 0..n {
        let v = es.vector(k);
        let av = a.mul_vec(&v);
        let res: f64 = av.iter().zip(&v).map(|(x, y)| (x - y * es.values[k]).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(res <= 1e-10 * norm, "residual {res} for pair {k}");
    }
    let vtv = &es.vectors.adjoint() * &es.vectors;
    let defect = op_norm(&(&vtv - &ComplexMatrix::identity(n)));
    prop_assert!(defect <= 1e-10, "orthonormality defect {defect}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jacobi_route_residuals(dim in 1usize..=40, seed in any::<u64>()) {
        let a = random_hermitian(dim, seed);
        check_system(&a, &eig_hermitian_jacobi(&a).unwrap())?;
    }

    #[test]
    fn householder_route_residuals(dim in 1usize..=64, seed in any::<u64>()) {
        let a = random_hermitian(dim, seed);
        check_system(&a, &eig_hermitian_householder(&a).unwrap())?;
    }

    #[test]
    fn routes_agree_on_eigenvalues(dim in 2usize..=48, seed in any::<u64>()) {
        let a = random_hermitian(dim, seed);
        let j = eig_hermitian_jacobi(&a).unwrap().values;
        let h = eig_hermitian_householder(&a).unwrap().values;
        let v = eigvals_hermitian(&a).unwrap();
        for ((x, y), z) in j.iter().zip(&h).zip(&v) {
            prop_assert!((x - y).abs() < 1e-12 && (x - z).abs() < 1e-12);
        }
    }

    #[test]
    fn produced_unitaries_have_unit_norm(dim in 1usize..=12, seed in any::<u64>(), t in -5.0f64..5.0) {
        let a = random_hermitian(dim, seed);
        let u = unitary_exp(&a, t).unwrap();
        prop_assert!(unitarity_defect(&u) <= 1e-10);
        prop_assert!((op_norm(&u) - 1.0).abs() <= 1e-8);
    }
}

#[test]
fn window_matches_full_solve() {
    let a = random_hermitian(120, 7);
    let full = eig_hermitian(&a).unwrap();
    let win = eig_hermitian_window(&a, -0.8, 1.1).unwrap();
    let expected: Vec<f64> = full.values.iter().copied().filter(|v| (-0.8..=1.1).contains(v)).collect();
    assert_eq!(win.values.len(), expected.len());
    for (v, (x, y)) in win.vectors.iter().zip(win.values.iter().zip(&expected)) {
        assert!((x - y).abs() < 1e-12);
        let av = a.mul_vec(v);
        let res: f64 = av.iter().zip(v).map(|(p, q)| (p - q * *x).norm_sqr()).sum::<f64>().sqrt();
        assert!(res < 1e-10 * 20.0, "residual {res}");
    }
    for i in 0..win.vectors.len() {
        for j in 0..win.vectors.len() {
            let d: C64 = win.vectors[i].iter().zip(&win.vectors[j]).map(|(p, q)| p.conj() * q).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((d - target).norm() < 1e-10, "overlap ({i},{j}) = {d}");
        }
    }
}

#[test]
fn empty_window_is_empty() {
    let a = random_hermitian(50, 3);
    assert!(eig_hermitian_window(&a, 0.3, 0.3 - 1e-9).unwrap().values.is_empty());
}

#[test]
fn identical_input_gives_identical_output() {
    let a = random_hermitian(40, 11);
    let x = eig_hermitian(&a).unwrap();
    let y = eig_hermitian(&a).unwrap();
    assert_eq!(x.values, y.values);
    assert_eq!(x.vectors, y.vectors);
}
