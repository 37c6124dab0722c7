//! Truncated replica Bloch Hamiltonians and their spectra.
//!
//! Replica blocks are ordered from mode `+n` (top-left) down to `-n`; block
//! row `k` couples to mode `k-1` through `εB*` and to mode `k+1` through `εB`.

use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{eig_hermitian, eigvals_hermitian, pauli_combination, ComplexMatrix, C64, ONE, ZERO};
use crate::numeric::golden_section_min;
use crate::{Error, Result};

/// Largest admissible drive period parameter.
pub const MAX_EPS: f64 = 0.5;

/// Parameters of the `(2n+1)`-replica model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReplicaModel {
    pub n: usize,
    pub m: f64,
    pub eps: f64,
}

impl ReplicaModel {
    pub fn new(n: usize, m: f64, eps: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&m) {
            return Err(Error::InvalidInput(format!("mass parameter m = {m} must lie in [-1, 1]")));
        }
        if !(eps > 0.0 && eps <= MAX_EPS) {
            return Err(Error::InvalidInput(format!("eps = {eps} must lie in (0, {MAX_EPS}]")));
        }
        Ok(Self { n, m, eps })
    }

    /// Number of replica blocks.
    pub fn replicas(&self) -> usize {
        2 * self.n + 1
    }

    pub fn dim(&self) -> usize {
        2 * self.replicas()
    }

    /// Block position of Fourier mode `k` (`-n ≤ k ≤ n`).
    pub fn block_of_mode(&self, k: i64) -> usize {
        assert!(k.unsigned_abs() as usize <= self.n, "mode {k} outside the truncation");
        (self.n as i64 - k) as usize
    }

    pub fn with_mass(&self, m: f64) -> Self {
        Self { m, ..*self }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..*self }
    }
}

/// A point of the rescaled momentum plane.
pub type BlochPoint = [f64; 2];

/// `B_m = ½(1+m)[[0,1],[0,0]] + ½(1−m)[[0,0],[1,0]]`.
pub fn coupling_matrix(m: f64) -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        &[ZERO, C64::new(0.5 * (1.0 + m), 0.0)],
        &[C64::new(0.5 * (1.0 - m), 0.0), ZERO],
    ])
}

/// Projector `Λ_s` paired with `B_s` for `s = ±1`: `B_s Λ_s = B_s`, `Λ_s B_s = 0`.
pub fn mass_projector(sign: i32) -> ComplexMatrix {
    match sign {
        1 => ComplexMatrix::from_real_diagonal(&[0.0, 1.0]),
        -1 => ComplexMatrix::from_real_diagonal(&[1.0, 0.0]),
        _ => panic!("projector sign must be +1 or -1"),
    }
}

/// `ξ·σ = ξ₁σ₁ + ξ₂σ₂`.
pub fn dirac_block(xi: BlochPoint) -> ComplexMatrix {
    pauli_combination(xi[0], xi[1], 0.0)
}

/// Replica Hamiltonian with an arbitrary 2×2 coupling block `coupling` (placed as `ε·coupling`
/// below the diagonal and its adjoint above).
pub(crate) fn replica_matrix(n: usize, eps: f64, xi: BlochPoint, coupling: &ComplexMatrix) -> ComplexMatrix {
    let r = 2 * n + 1;
    let mut h = ComplexMatrix::zeros(2 * r);
    let dirac = dirac_block(xi);
    let lower = coupling.scale(C64::new(eps, 0.0));
    let upper = lower.adjoint();
    for a in 0..r {
        let k = n as f64 - a as f64;
        let mut diag = dirac.clone();
        diag[(0, 0)] += k;
        diag[(1, 1)] += k;
        h.set_block(2 * a, 2 * a, &diag);
        if a + 1 < r {
            h.set_block(2 * a, 2 * (a + 1), &upper);
            h.set_block(2 * (a + 1), 2 * a, &lower);
        }
    }
    h
}

/// Bloch matrix `Ĥ_n(ξ)` of dimension `2(2n+1)`.
pub fn bloch_hamiltonian(model: &ReplicaModel, xi: BlochPoint) -> ComplexMatrix {
    replica_matrix(model.n, model.eps, xi, &coupling_matrix(model.m))
}

/// Effective two-band matrix `ξ·σ + ε²(B*B − BB*)`, which equals `ξ·σ − ε²mσ₃`.
pub fn effective_2x2(model: &ReplicaModel, xi: BlochPoint) -> ComplexMatrix {
    let b = coupling_matrix(model.m);
    let bd = b.adjoint();
    let commutator = &(&bd * &b) - &(&b * &bd);
    &dirac_block(xi) + &commutator.scale(C64::new(model.eps * model.eps, 0.0))
}

/// Eigenvalue sheets sampled over a list of momenta.
#[derive(Clone, Debug, Serialize)]
pub struct BandStructure {
    pub grid: Vec<BlochPoint>,
    /// Ascending eigenvalues per grid point.
    pub sheets: Vec<Vec<f64>>,
    /// `min_i |E_i|` per grid point.
    pub gap_at_zero: Vec<f64>,
}

pub fn band_structure(model: &ReplicaModel, grid: &[BlochPoint]) -> Result<BandStructure> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("band structure grid is empty".into()));
    }
    let sheets: Vec<Vec<f64>> =
        grid.par_iter().map(|&xi| eigvals_hermitian(&bloch_hamiltonian(model, xi))).collect::<Result<_>>()?;
    let gap_at_zero = sheets.iter().map(|s| min_abs(s)).collect();
    Ok(BandStructure { grid: grid.to_vec(), sheets, gap_at_zero })
}

fn min_abs(values: &[f64]) -> f64 {
    values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
}

/// `min_i |E_i(ξ)|` of the Bloch matrix.
pub fn distance_to_zero(model: &ReplicaModel, xi: BlochPoint) -> f64 {
    min_abs(&eigvals_hermitian(&bloch_hamiltonian(model, xi)).expect("Bloch matrices are Hermitian"))
}

/// Minimal gap around `E = 0` near the ring `|ξ| ≈ ell`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RingGap {
    /// Full gap `2·min|E|`.
    pub gap: f64,
    /// Radius at which the minimum is attained.
    pub location: f64,
}

/// Number of radial samples used to bracket the ring minimum.
const RING_SCAN_POINTS: usize = 401;

/// Minimises `min|E|` along the `ξ₁` axis over `[ell−½, ell+½]` (`[0, ½]` for `ell = 0`).
pub fn ring_gap(model: &ReplicaModel, ell: usize) -> Result<RingGap> {
    if ell > model.n {
        return Err(Error::InvalidInput(format!("ring {ell} exceeds the truncation n = {}", model.n)));
    }
    let lo = if ell == 0 { 0.0 } else { ell as f64 - 0.5 };
    let hi = ell as f64 + 0.5;
    let f = |r: f64| distance_to_zero(model, [r, 0.0]);
    let step = (hi - lo) / (RING_SCAN_POINTS - 1) as f64;
    let samples: Vec<f64> = (0..RING_SCAN_POINTS).map(|i| f(lo + step * i as f64)).collect();
    let best = samples.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
    let a = lo + step * best.saturating_sub(1) as f64;
    let b = (lo + step * (best + 1) as f64).min(hi);
    let (mut location, mut value) = golden_section_min(f, a, b, 1e-13);
    if samples[best] < value {
        location = lo + step * best as f64;
        value = samples[best];
    }
    Ok(RingGap { gap: 2.0 * value, location })
}

/// `c(ξ) = ∏_{k=1−ℓ}^{ℓ−1} |ξ| / (|ξ|² − k²)`.
pub fn ring_coupling_constant(ell: usize, radius: f64) -> f64 {
    let l = ell as i64;
    ((1 - l)..l).map(|k| radius / (radius * radius - (k * k) as f64)).product()
}

/// Effective coupling between the two zero modes living on replicas `−ℓ` and `+ℓ`, divided by `ε^{2ℓ}`.
///
/// All other replicas are eliminated by a Schur complement at `E = 0`; the resulting
/// `−ℓ,+ℓ` block is sandwiched between the unperturbed zero modes
/// `(ξ̂̄, 1)/√2` on replica `−ℓ` and `(−ξ̂̄, 1)/√2` on replica `+ℓ`.
pub fn midgap_coupling(model: &ReplicaModel, xi: BlochPoint, ell: usize) -> Result<C64> {
    if ell == 0 || ell > model.n {
        return Err(Error::InvalidInput(format!("ring index {ell} must lie in 1..={}", model.n)));
    }
    let radius = xi[0].hypot(xi[1]);
    if radius == 0.0 {
        return Err(Error::InvalidInput("coupling is undefined at xi = 0".into()));
    }
    let h = bloch_hamiltonian(model, xi);
    let kept = [model.block_of_mode(ell as i64), model.block_of_mode(-(ell as i64))];
    let kept_idx: Vec<usize> = kept.iter().flat_map(|&b| [2 * b, 2 * b + 1]).collect();
    let rest_idx: Vec<usize> = (0..h.dim()).filter(|i| !kept_idx.contains(i)).collect();
    let sub = |rows: &[usize], cols: &[usize]| -> Vec<Vec<C64>> {
        rows.iter().map(|&i| cols.iter().map(|&j| h[(i, j)]).collect()).collect()
    };
    let h_kk = sub(&kept_idx, &kept_idx);
    let h_kr = sub(&kept_idx, &rest_idx);
    let h_rr = sub(&rest_idx, &rest_idx);
    let h_rk = sub(&rest_idx, &kept_idx);
    let x = solve_dense(h_rr, h_rk)?;
    let mut eff = h_kk;
    for (i, row) in eff.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            let corr: C64 = h_kr[i].iter().zip(&x).map(|(a, xr)| a * xr[j]).sum();
            *e -= corr;
        }
    }
    let unit = C64::new(xi[0] / radius, -xi[1] / radius);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v_minus = [unit * s, ONE * s];
    let v_plus = [-unit * s, ONE * s];
    // Row block of mode −ℓ occupies eff rows 2..4; column block of mode +ℓ occupies columns 0..2.
    let mut eta = ZERO;
    for a in 0..2 {
        for b in 0..2 {
            eta += v_minus[a].conj() * eff[2 + a][b] * v_plus[b];
        }
    }
    Ok(eta / model.eps.powi(2 * ell as i32))
}

/// Solves `A X = B` for square `A` by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<C64>>, mut b: Vec<Vec<C64>>) -> Result<Vec<Vec<C64>>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        if a[pivot][col].norm() < 1e-14 {
            return Err(Error::InvalidInput("singular system in Schur complement".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == ZERO {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            for k in 0..b[row].len() {
                let v = b[col][k];
                b[row][k] -= f * v;
            }
        }
    }
    for col in (0..n).rev() {
        for k in 0..b[col].len() {
            let mut acc = b[col][k];
            for j in col + 1..n {
                acc -= a[col][j] * b[j][k];
            }
            b[col][k] = acc / a[col][col];
        }
    }
    Ok(b)
}

/// Full eigendecomposition of the Bloch matrix, convenient for callers needing vectors.
pub fn bloch_eigensystem(model: &ReplicaModel, xi: BlochPoint) -> Result<crate::linalg::EigenSystem> {
    eig_hermitian(&bloch_hamiltonian(model, xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli;

    #[test]
    fn coupling_matrix_examples() {
        assert_eq!(coupling_matrix(1.0), ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ZERO, ZERO]]));
        assert_eq!(coupling_matrix(-1.0), ComplexMatrix::from_rows(&[&[ZERO, ZERO], &[ONE, ZERO]]));
        assert_eq!(coupling_matrix(0.0), pauli(1).scale(C64::new(0.5, 0.0)));
    }

    #[test]
    fn projector_relations() {
        for s in [1, -1] {
            let b = coupling_matrix(s as f64);
            let l = mass_projector(s);
            assert_eq!(&b * &l, b);
            assert_eq!((&l * &b).max_abs(), 0.0);
            assert_eq!((&b * &b).max_abs(), 0.0);
        }
    }

    #[test]
    fn layout_matches_three_replica_display() {
        let model = ReplicaModel::new(1, 1.0, 0.1).unwrap();
        let h = bloch_hamiltonian(&model, [0.0, 0.0]);
        assert_eq!(h.dim(), 6);
        assert_eq!(h[(0, 0)], ONE);
        assert_eq!(h[(4, 4)], -ONE);
        // Row block of mode +1, column block of mode 0 carries εB*.
        assert_eq!(h.block(0, 2, 2), coupling_matrix(1.0).adjoint().scale(C64::new(0.1, 0.0)));
        assert_eq!(h.block(2, 0, 2), coupling_matrix(1.0).scale(C64::new(0.1, 0.0)));
        assert_eq!(h.block(0, 4, 2).max_abs(), 0.0);
    }

    #[test]
    fn unperturbed_single_replica() {
        let model = ReplicaModel::new(0, 0.3, 0.2).unwrap();
        let es = bloch_eigensystem(&model, [1.0, 0.0]).unwrap();
        assert!((es.values[0] + 1.0).abs() < 1e-15 && (es.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn central_gap_is_eps_squared() {
        let model = ReplicaModel::new(1, 1.0, 0.1).unwrap();
        let d = distance_to_zero(&model, [0.0, 0.0]);
        assert!((d - 0.01).abs() < 1e-4, "{d}");
    }

    #[test]
    fn effective_model_examples() {
        let model = ReplicaModel::new(1, 1.0, 0.1).unwrap();
        let h = effective_2x2(&model, [0.0, 0.0]);
        assert!((&h - &pauli(3).scale(C64::new(-0.01, 0.0))).max_abs() < 1e-17);
        let h = effective_2x2(&model.with_mass(-1.0), [0.0, 0.0]);
        assert!((&h - &pauli(3).scale(C64::new(0.01, 0.0))).max_abs() < 1e-17);
        let ev = eigvals_hermitian(&effective_2x2(&model, [0.3, 0.4])).unwrap();
        assert!((ev[1] - (0.25f64 + 1e-4).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(ReplicaModel::new(1, 1.2, 0.1).is_err());
        assert!(ReplicaModel::new(1, 1.0, 0.6).is_err());
        assert!(ReplicaModel::new(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn ring_constant_values() {
        assert_eq!(ring_coupling_constant(1, 1.0), 1.0);
        assert!((ring_coupling_constant(2, 2.0) - 2.0 / 9.0).abs() < 1e-15);
    }
}
