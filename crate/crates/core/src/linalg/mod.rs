//! Dense complex linear algebra.

mod eigen;
mod ode;

use std::ops::{Add, Index, IndexMut, Mul, Sub};

pub use eigen::{
    eig_hermitian, eig_hermitian_householder, eig_hermitian_jacobi, eig_hermitian_window, eigvals_hermitian, EigenSystem,
    SpectralWindow, JACOBI_MAX_DIM,
};
pub use num_complex::Complex64 as C64;
pub use ode::{ode_propagate, ode_propagate_state, OdeOptions};
pub(crate) use ode::ode_propagate_with;

use crate::{Error, Result};

/// Relative hermiticity tolerance used when a matrix is required to be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major entries. Panics if the length is not a square.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |i, j| {
            assert_eq!(rows[i].len(), dim, "row {i} has wrong length");
            rows[i][j]
        })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max_ij |A_ij - conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Checks the Hermitian flag condition relative to the operator norm.
    pub fn ensure_hermitian(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::NonFinite);
        }
        let defect = self.hermitian_defect();
        if defect == 0.0 {
            return Ok(());
        }
        // The Frobenius norm bounds the operator norm from above and avoids a
        // recursive eigen-solve here; the check is only a guard.
        let norm = self.frobenius_norm();
        if defect > HERMITIAN_TOL * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::NotHermitian { defect, norm });
        }
        Ok(())
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim).map(|i| dot_unconj(self.row(i), v)).collect()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        Self::from_fn(a * b, |i, j| self[(i / b, j / b)] * other[(i % b, j % b)])
    }

    /// Copies the `rows×cols`-sized block starting at `(r0, c0)` from `block` into self.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        let b = block.dim;
        for i in 0..b {
            let dst = (r0 + i) * self.dim + c0;
            self.data[dst..dst + b].copy_from_slice(block.row(i));
        }
    }

    /// Extracts the `size×size` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, size: usize) -> Self {
        Self::from_fn(size, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        op_norm(self)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

/// `Σ a_k b_k` without conjugation.
pub fn dot_unconj(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inner product `⟨u, v⟩ = Σ conj(u_k) v_k`.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Pauli matrices σ₁, σ₂, σ₃.
pub fn pauli(k: usize) -> ComplexMatrix {
    match k {
        1 => ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]),
        2 => ComplexMatrix::from_rows(&[&[ZERO, -I], &[I, ZERO]]),
        3 => ComplexMatrix::from_rows(&[&[ONE, ZERO], &[ZERO, -ONE]]),
        _ => panic!("Pauli index must be 1, 2 or 3"),
    }
}

/// `a₁σ₁ + a₂σ₂ + a₃σ₃`.
pub fn pauli_combination(a1: f64, a2: f64, a3: f64) -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        &[C64::new(a3, 0.0), C64::new(a1, -a2)],
        &[C64::new(a1, a2), C64::new(-a3, 0.0)],
    ])
}

/// `exp(-i t A)` for Hermitian `A`, built from the eigendecomposition.
pub fn unitary_exp(a: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let es = eig_hermitian(a)?;
    let n = a.dim();
    let phases: Vec<C64> = es.values.iter().map(|&l| C64::from_polar(1.0, -t * l)).collect();
    let v = &es.vectors;
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += v[(i, k)] * phases[k] * v[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Largest singular value, computed as the square root of the top eigenvalue of `A*A`.
pub fn op_norm(a: &ComplexMatrix) -> f64 {
    let n = a.dim();
    if n == 1 {
        return a[(0, 0)].norm();
    }
    let scale = a.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let b = a.scale(C64::new(1.0 / scale, 0.0));
    let mut gram = &b.adjoint() * &b;
    // Symmetrise to remove the rounding asymmetry of the product.
    for i in 0..n {
        gram[(i, i)].im = 0.0;
        for j in i + 1..n {
            let avg = (gram[(i, j)] + gram[(j, i)].conj()) * 0.5;
            gram[(i, j)] = avg;
            gram[(j, i)] = avg.conj();
        }
    }
    let es = eig_hermitian(&gram).expect("Gram matrix is Hermitian by construction");
    scale * es.values[n - 1].max(0.0).sqrt()
}

/// `‖U*U − I‖_op`.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let g = &u.adjoint() * u;
    op_norm(&(&g - &ComplexMatrix::identity(u.dim())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn pauli_algebra() {
        let s1 = pauli(1);
        let s2 = pauli(2);
        let s3 = pauli(3);
        assert!(close(&(&s1 * &s2), &s3.scale(I), 0.0));
        assert!(close(&(&s1 * &s1), &ComplexMatrix::identity(2), 0.0));
        assert!(close(&pauli_combination(0.3, -0.7, 1.1), &(&(&s1.scale(C64::new(0.3, 0.0)) + &s2.scale(C64::new(-0.7, 0.0))) + &s3.scale(C64::new(1.1, 0.0))), 1e-15));
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let u = unitary_exp(&ComplexMatrix::zeros(3), 2.7).unwrap();
        assert!(close(&u, &ComplexMatrix::identity(3), 1e-15));
    }

    #[test]
    fn exp_of_sigma3_at_pi_is_minus_identity() {
        let u = unitary_exp(&pauli(3), std::f64::consts::PI).unwrap();
        assert!(close(&u, &ComplexMatrix::identity(2).scale(-ONE), 1e-14));
    }

    #[test]
    fn exp_of_sigma1_at_half_pi() {
        let u = unitary_exp(&pauli(1), std::f64::consts::FRAC_PI_2).unwrap();
        assert!(close(&u, &pauli(1).scale(-I), 1e-14));
    }

    #[test]
    fn op_norm_examples() {
        assert!((op_norm(&ComplexMatrix::identity(5)) - 1.0).abs() < 1e-12);
        let b1 = ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ZERO, ZERO]]);
        assert!((op_norm(&b1) - 1.0).abs() < 1e-12);
        assert!((op_norm(&b1.scale(C64::new(2.0, 0.0))) - 2.0).abs() < 1e-12);
        assert_eq!(op_norm(&ComplexMatrix::zeros(3)), 0.0);
    }

    #[test]
    fn hermitian_guard_reports_defect() {
        let mut a = pauli(1);
        a[(0, 1)] = C64::new(1.5, 0.0);
        match a.ensure_hermitian() {
            Err(Error::NotHermitian { defect, .. }) => assert!((defect - 0.5).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kron_dimensions_and_entries() {
        let k = pauli(1).kron(&pauli(3));
        assert_eq!(k.dim(), 4);
        assert_eq!(k[(0, 2)], ONE);
        assert_eq!(k[(1, 3)], -ONE);
    }
}
