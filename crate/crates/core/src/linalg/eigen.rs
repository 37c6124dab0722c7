//! Hermitian eigensolvers.
//!
//! Small matrices use cyclic complex Jacobi rotations. Larger ones are reduced
//! to a real symmetric tridiagonal form by Householder reflections followed by
//! a diagonal phase change, then solved by implicit QL (all pairs) or by Sturm
//! bisection plus inverse iteration (pairs inside an energy window).

use super::{ComplexMatrix, C64, ONE, ZERO};
use crate::Result;

/// Matrices up to this dimension are diagonalised with Jacobi rotations.
pub const JACOBI_MAX_DIM: usize = 32;

const MAX_JACOBI_SWEEPS: usize = 100;
const MAX_QL_ITERATIONS: usize = 60;

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenSystem {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }
}

/// Eigenpairs with eigenvalues inside a closed interval.
#[derive(Clone, Debug, Default)]
pub struct SpectralWindow {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
}

/// Full eigendecomposition of a Hermitian matrix.
pub fn eig_hermitian(a: &ComplexMatrix) -> Result<EigenSystem> {
    a.ensure_hermitian()?;
    if a.dim() <= JACOBI_MAX_DIM {
        Ok(jacobi(a))
    } else {
        Ok(householder_ql(a))
    }
}

/// Eigenvalues only, ascending.
pub fn eigvals_hermitian(a: &ComplexMatrix) -> Result<Vec<f64>> {
    a.ensure_hermitian()?;
    if a.dim() <= JACOBI_MAX_DIM {
        return Ok(jacobi(a).values);
    }
    let tri = Tridiagonal::reduce(a);
    let mut d = tri.diag.clone();
    let mut e = tri.off.clone();
    e.push(0.0);
    tql(&mut d, &mut e, None);
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenpairs with eigenvalues in `[lo, hi]`, ascending.
pub fn eig_hermitian_window(a: &ComplexMatrix, lo: f64, hi: f64) -> Result<SpectralWindow> {
    a.ensure_hermitian()?;
    if hi < lo {
        return Ok(SpectralWindow::default());
    }
    if a.dim() <= JACOBI_MAX_DIM {
        let es = jacobi(a);
        let mut out = SpectralWindow::default();
        for (k, &v) in es.values.iter().enumerate() {
            if v >= lo && v <= hi {
                out.values.push(v);
                out.vectors.push(es.vector(k));
            }
        }
        return Ok(out);
    }
    let tri = Tridiagonal::reduce(a);
    let values = tri.bisect_window(lo, hi);
    let real_vectors = tri.inverse_iteration(&values);
    let vectors = real_vectors.iter().map(|z| tri.back_transform(z)).collect();
    Ok(SpectralWindow { values, vectors })
}

/// Cyclic Jacobi, exposed for cross-validation against the Householder route.
pub fn eig_hermitian_jacobi(a: &ComplexMatrix) -> Result<EigenSystem> {
    a.ensure_hermitian()?;
    Ok(jacobi(a))
}

/// Householder + QL, exposed for cross-validation against the Jacobi route.
pub fn eig_hermitian_householder(a: &ComplexMatrix) -> Result<EigenSystem> {
    a.ensure_hermitian()?;
    Ok(householder_ql(a))
}

fn sort_system(values: Vec<f64>, vectors: ComplexMatrix) -> EigenSystem {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let sorted_vectors = ComplexMatrix::from_fn(n, |r, c| vectors[(r, order[c])]);
    EigenSystem { values: sorted_values, vectors: sorted_vectors }
}

fn jacobi(a: &ComplexMatrix) -> EigenSystem {
    let n = a.dim();
    let mut m = a.clone();
    let mut v = ComplexMatrix::identity(n);
    for i in 0..n {
        m[(i, i)].im = 0.0;
    }
    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return EigenSystem { values: vec![0.0; n], vectors: v };
    }
    let off_norm = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += m[(i, j)].norm_sqr();
            }
        }
        s.sqrt()
    };
    for _ in 0..MAX_JACOBI_SWEEPS {
        if off_norm(&m) <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let abs_pq = apq.norm();
                if abs_pq <= 1e-300 || abs_pq <= 1e-18 * scale {
                    m[(p, q)] = ZERO;
                    m[(q, p)] = ZERO;
                    continue;
                }
                let phase = apq / abs_pq;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (2.0 * abs_pq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // J = [[c, s], [-s e^{-iφ}, c e^{-iφ}]] acting on coordinates (p, q).
                let ph_conj = phase.conj();
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * c - mkq * ph_conj * s;
                    m[(k, q)] = mkp * s + mkq * ph_conj * c;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = mpk * c - mqk * phase * s;
                    m[(q, k)] = mpk * s + mqk * phase * c;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                m[(p, p)] = C64::new(app - t * abs_pq, 0.0);
                m[(q, q)] = C64::new(aqq + t * abs_pq, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * ph_conj * s;
                    v[(k, q)] = vkp * s + vkq * ph_conj * c;
                }
            }
        }
    }
    let values = (0..n).map(|i| m[(i, i)].re).collect();
    sort_system(values, v)
}

/// Real symmetric tridiagonal form `P* Q* A Q P` of a Hermitian matrix.
struct Tridiagonal {
    dim: usize,
    diag: Vec<f64>,
    /// Nonnegative off-diagonal entries, length `dim - 1`.
    off: Vec<f64>,
    /// Diagonal phases `P`.
    phases: Vec<C64>,
    /// Householder vectors; reflector `k` acts on coordinates `k+1..dim`.
    reflectors: Vec<Option<Vec<C64>>>,
}

impl Tridiagonal {
    fn reduce(a: &ComplexMatrix) -> Self {
        let n = a.dim();
        let mut w = a.as_slice().to_vec();
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
        let mut p = vec![ZERO; n];
        for k in 0..n.saturating_sub(2) {
            let m = n - k - 1;
            let x: Vec<C64> = (k + 1..n).map(|i| w[i * n + k]).collect();
            let sigma = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let tail = x[1..].iter().map(|z| z.norm_sqr()).sum::<f64>();
            if sigma == 0.0 || tail == 0.0 {
                reflectors.push(None);
                continue;
            }
            let x0_abs = x[0].norm();
            let phase = if x0_abs == 0.0 { ONE } else { x[0] / x0_abs };
            let alpha = -phase * sigma;
            let mut v = x;
            v[0] -= alpha;
            let vnorm = (2.0 * sigma * (sigma + x0_abs)).sqrt();
            for z in v.iter_mut() {
                *z /= vnorm;
            }
            // p = S v, c = v* p on the trailing block S = w[k+1.., k+1..].
            let pv = &mut p[..m];
            for (i, pi) in pv.iter_mut().enumerate() {
                let row = &w[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
                *pi = row.iter().zip(&v).map(|(s, vj)| s * vj).sum();
            }
            let c: f64 = v.iter().zip(pv.iter()).map(|(vi, pi)| (vi.conj() * pi).re).sum();
            let q: Vec<C64> = pv.iter().zip(&v).map(|(pi, vi)| (pi - vi * c) * 2.0).collect();
            for i in 0..m {
                let vi = v[i];
                let qi = q[i];
                let row = &mut w[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
                for ((s, vj), qj) in row.iter_mut().zip(&v).zip(&q) {
                    *s -= vi * qj.conj() + qi * vj.conj();
                }
            }
            for i in k + 1..n {
                w[i * n + k] = ZERO;
                w[k * n + i] = ZERO;
            }
            w[(k + 1) * n + k] = alpha;
            w[k * n + k + 1] = alpha.conj();
            reflectors.push(Some(v));
        }
        let diag: Vec<f64> = (0..n).map(|i| w[i * n + i].re).collect();
        let mut off = Vec::with_capacity(n.saturating_sub(1));
        let mut phases = vec![ONE; n];
        for i in 0..n.saturating_sub(1) {
            let e = w[(i + 1) * n + i];
            let abs = e.norm();
            off.push(abs);
            phases[i + 1] = if abs == 0.0 { phases[i] } else { phases[i] * (e / abs) };
        }
        Self { dim: n, diag, off, phases, reflectors }
    }

    /// Maps a real eigenvector `z` of the tridiagonal form to an eigenvector of the original matrix.
    fn back_transform(&self, z: &[f64]) -> Vec<C64> {
        let mut y: Vec<C64> = z.iter().zip(&self.phases).map(|(&zi, ph)| ph * zi).collect();
        for (k, refl) in self.reflectors.iter().enumerate().rev() {
            if let Some(v) = refl {
                let tail = &mut y[k + 1..];
                let proj: C64 = v.iter().zip(tail.iter()).map(|(vi, yi)| vi.conj() * yi).sum();
                for (yi, vi) in tail.iter_mut().zip(v) {
                    *yi -= vi * proj * 2.0;
                }
            }
        }
        y
    }

    fn norm_bound(&self) -> f64 {
        let n = self.dim;
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.off[i - 1] } else { 0.0 };
                let right = if i + 1 < n { self.off[i] } else { 0.0 };
                self.diag[i].abs() + left + right
            })
            .fold(0.0, f64::max)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + self.norm_bound());
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.dim {
            if i > 0 {
                let e = self.off[i - 1];
                q = self.diag[i] - x - e * e / q;
            }
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn bisect_window(&self, lo: f64, hi: f64) -> Vec<f64> {
        let first = self.count_below(lo);
        let past = self.count_below(hi.next_up());
        let tol = 4.0 * f64::EPSILON * self.norm_bound().max(1e-300);
        (first..past)
            .map(|k| {
                let (mut a, mut b) = (lo, hi);
                while b - a > tol {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    if self.count_below(mid) > k {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                0.5 * (a + b)
            })
            .collect()
    }

    fn inverse_iteration(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim;
        let norm = self.norm_bound().max(1e-300);
        let cluster_gap = 1e-3 * norm;
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(values.len());
        let mut cluster_start = 0;
        let mut previous_shift = f64::NEG_INFINITY;
        for (j, &lambda) in values.iter().enumerate() {
            if j > 0 && lambda - values[j - 1] > cluster_gap {
                cluster_start = j;
            }
            let mut shift = lambda;
            if shift - previous_shift < 10.0 * f64::EPSILON * norm {
                shift = previous_shift + 10.0 * f64::EPSILON * norm;
            }
            previous_shift = shift;
            let mut x: Vec<f64> =
                (0..n).map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_894_9 * (j as f64 + 1.0)).sin()).collect();
            for _ in 0..5 {
                solve_shifted(&self.diag, &self.off, shift, norm, &mut x);
                for prev in &out[cluster_start..j] {
                    let d: f64 = prev.iter().zip(&x).map(|(a, b)| a * b).sum();
                    for (xi, pi) in x.iter_mut().zip(prev) {
                        *xi -= d * pi;
                    }
                }
                let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                for xi in x.iter_mut() {
                    *xi /= nrm;
                }
            }
            out.push(x);
        }
        out
    }
}

/// Solves `(T - shift) x = b` in place by Gaussian elimination with partial pivoting.
fn solve_shifted(diag: &[f64], off: &[f64], shift: f64, norm: f64, b: &mut [f64]) {
    let n = diag.len();
    let tiny = f64::EPSILON * norm;
    if n == 1 {
        let d = diag[0] - shift;
        b[0] /= if d.abs() < tiny { tiny } else { d };
        return;
    }
    let mut d: Vec<f64> = diag.iter().map(|x| x - shift).collect();
    let mut dl: Vec<f64> = off.to_vec();
    let mut du: Vec<f64> = off.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i].abs() < tiny {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
        dl[i] = 0.0;
    }
    if d[n - 1].abs() < tiny {
        d[n - 1] = tiny;
    }
    b[n - 1] /= d[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
}

/// Implicit QL on a real symmetric tridiagonal matrix. `e[i]` couples `i` and `i+1`;
/// `e` has length `n` with a trailing zero. When `z` is given its rows are
/// rotated, so on exit row `i` holds the eigenvector for `d[i]`.
fn tql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut Vec<Vec<f64>>>) {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= MAX_QL_ITERATIONS, "implicit QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut early = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let (lo, hi) = z.split_at_mut(i + 1);
                    let zi = &mut lo[i];
                    let zi1 = &mut hi[0];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let f = *b;
                        *b = s * *a + c * f;
                        *a = c * *a - s * f;
                    }
                }
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

fn householder_ql(a: &ComplexMatrix) -> EigenSystem {
    let n = a.dim();
    let tri = Tridiagonal::reduce(a);
    let mut d = tri.diag.clone();
    let mut e = tri.off.clone();
    e.push(0.0);
    let mut z: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            row
        })
        .collect();
    tql(&mut d, &mut e, Some(&mut z));
    let mut vectors = ComplexMatrix::zeros(n);
    for (k, zk) in z.iter().enumerate() {
        let y = tri.back_transform(zk);
        for (i, yi) in y.into_iter().enumerate() {
            vectors[(i, k)] = yi;
        }
    }
    sort_system(d, vectors)
}
