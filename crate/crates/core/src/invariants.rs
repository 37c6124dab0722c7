//! Berry-curvature (Kubo) integrand and the bulk invariants built from it.
//!
//! Inner products follow the convention `⟨u, v⟩ = Σ u_k conj(v_k)` (linear in
//! the first slot); with it the normalisation `W = i/(8π²) ∫ T d²ξ` assigns
//! `−sign(m)/2` to a massive Dirac cone with mass term `−mσ₃`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{eig_hermitian, ComplexMatrix, C64, ZERO};
use crate::numeric::{gauss_legendre, golden_section_min, pairwise_sum};
use crate::replica::{bloch_hamiltonian, effective_2x2, BlochPoint, ReplicaModel};
use crate::{Error, Result};

/// Below this `min|E|` the integrand is treated as singular.
pub const GAP_CLOSURE_TOL: f64 = 1e-8;
/// Pairs closer than this in energy are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

const ANGLE_OFFSET: f64 = 0.1;

/// Source of a Bloch matrix: the truncated replica model or its effective two-band reduction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BulkHamiltonian {
    Replica(ReplicaModel),
    Effective(ReplicaModel),
}

impl BulkHamiltonian {
    pub fn model(&self) -> &ReplicaModel {
        match self {
            BulkHamiltonian::Replica(m) | BulkHamiltonian::Effective(m) => m,
        }
    }

    pub fn matrix(&self, xi: BlochPoint) -> ComplexMatrix {
        match self {
            BulkHamiltonian::Replica(m) => bloch_hamiltonian(m, xi),
            BulkHamiltonian::Effective(m) => effective_2x2(m, xi),
        }
    }

    /// Rings `|ξ| ≈ ℓ` where curvature concentrates (`ℓ = 0` is the centre).
    pub fn ring_count(&self) -> usize {
        match self {
            BulkHamiltonian::Replica(m) => m.n + 1,
            BulkHamiltonian::Effective(_) => 1,
        }
    }

    pub fn with_mass(&self, m: f64) -> Self {
        match self {
            BulkHamiltonian::Replica(x) => BulkHamiltonian::Replica(x.with_mass(m)),
            BulkHamiltonian::Effective(x) => BulkHamiltonian::Effective(x.with_mass(m)),
        }
    }
}

/// Kubo integrand `T(ξ) = 4πi Σ_{i<j} (sgn h_i − sgn h_j)/(h_i − h_j)² Im(⟨ψ_i, ∂₁H ψ_j⟩⟨ψ_j, ∂₂H ψ_i⟩)`
/// with `∂₁H = I ⊗ σ₁`, `∂₂H = I ⊗ σ₂`.
pub fn kubo_integrand(h: &BulkHamiltonian, xi: BlochPoint) -> Result<C64> {
    kubo_from_matrix(&h.matrix(xi), xi)
}

fn kubo_from_matrix(matrix: &ComplexMatrix, xi: BlochPoint) -> Result<C64> {
    let es = eig_hermitian(matrix)?;
    kubo_from_eigensystem(&es.values, &es.vectors, xi)
}

pub(crate) fn kubo_from_eigensystem(values: &[f64], vectors: &ComplexMatrix, xi: BlochPoint) -> Result<C64> {
    let d = values.len();
    let min_abs = values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if min_abs <= GAP_CLOSURE_TOL {
        return Err(Error::GapClosure { xi1: xi[0], xi2: xi[1], min_abs });
    }
    // Columns of σ₁V and σ₂V: within each two-component block, σ₁ swaps and σ₂ swaps with ∓i.
    let s1v = |r: usize, c: usize| vectors[(r ^ 1, c)];
    let s2v = |r: usize, c: usize| {
        let z = vectors[(r ^ 1, c)];
        if r % 2 == 0 {
            C64::new(z.im, -z.re)
        } else {
            C64::new(-z.im, z.re)
        }
    };
    // Physics-convention matrix elements a_ij = ψ_i† ∂H ψ_j.
    let elem = |i: usize, j: usize, op: &dyn Fn(usize, usize) -> C64| -> C64 {
        (0..d).map(|r| vectors[(r, i)].conj() * op(r, j)).sum()
    };
    let first_positive = values.iter().position(|&v| v > 0.0).unwrap_or(d);
    let mut acc = 0.0;
    for i in 0..first_positive {
        for j in first_positive..d {
            let gap = values[j] - values[i];
            if gap < DEGENERACY_TOL {
                return Err(Error::GapClosure { xi1: xi[0], xi2: xi[1], min_abs });
            }
            let a = elem(i, j, &s1v);
            let b = elem(j, i, &s2v);
            // With the first-slot-linear product both matrix elements are conjugated.
            let im = (a.conj() * b.conj()).im;
            acc += -2.0 / (gap * gap) * im;
        }
    }
    Ok(C64::new(0.0, 4.0 * PI * acc))
}

/// `i/(8π²) T`, the real density whose integral is the invariant.
pub fn curvature_density(h: &BulkHamiltonian, xi: BlochPoint) -> Result<f64> {
    let t = kubo_integrand(h, xi)?;
    Ok((C64::new(0.0, 1.0) * t / (8.0 * PI * PI)).re)
}

/// Samples of the integrand at caller-supplied nodes.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureField {
    pub hamiltonian: BulkHamiltonian,
    pub nodes: Vec<BlochPoint>,
    pub weights: Vec<f64>,
    /// `T(ξ)` per node, stored as `[re, im]`.
    pub samples: Vec<[f64; 2]>,
}

impl CurvatureField {
    pub fn sample(hamiltonian: BulkHamiltonian, nodes: Vec<BlochPoint>, weights: Vec<f64>) -> Result<Self> {
        let samples = nodes
            .par_iter()
            .map(|&xi| kubo_integrand(&hamiltonian, xi).map(|t| [t.re, t.im]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { hamiltonian, nodes, weights, samples })
    }

    /// `i/(8π²) Σ w_k T(ξ_k)`.
    pub fn integrate(&self) -> f64 {
        let terms: Vec<f64> = self.samples.iter().zip(&self.weights).map(|(t, w)| -t[1] * w).collect();
        pairwise_sum(&terms) / (8.0 * PI * PI)
    }
}

/// Resolution controls for the polar quadrature.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadratureSpec {
    /// Outer radius of the integration disk.
    pub r_max: f64,
    /// Gauss–Legendre order per radial panel on the fine pass (the coarse pass uses ⅔ of it).
    pub radial_order: usize,
    /// Initial number of angular nodes.
    pub min_angles: usize,
    /// Angular refinement stops here.
    pub max_angles: usize,
    /// Absolute target for the resolution part of the error estimate.
    pub tol: f64,
}

impl QuadratureSpec {
    pub fn for_truncation(n: usize) -> Self {
        Self { r_max: n as f64 + 39.0, radial_order: 18, min_angles: 8, max_angles: 256, tol: 1e-4 }
    }

    /// Doubles radial and angular resolution.
    pub fn refined(&self) -> Self {
        Self {
            radial_order: self.radial_order * 2,
            min_angles: self.min_angles * 2,
            max_angles: self.max_angles * 2,
            ..*self
        }
    }
}

/// Integrated invariant of a single bulk Hamiltonian.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantEstimate {
    pub value: f64,
    /// Integral over each annulus `[ℓ−½, ℓ+½]` (`[0, ½]` for the centre); the outermost
    /// annulus extends to `r_max`, so the entries sum to `value`.
    pub rings: Vec<f64>,
    /// Integral over `n + ½ ≤ |ξ| ≤ r_max`.
    pub outer: f64,
    /// Resolution difference plus a tail term. The tail decays like `1/r`, so the change between
    /// `r_max/2` and `r_max` approximates what lies beyond `r_max`; it is counted twice as margin.
    pub error_estimate: f64,
    pub angles_used: usize,
}

/// Contributions along a single ray, accumulated over radial panels.
#[derive(Clone, Debug)]
struct RayIntegral {
    rings: Vec<f64>,
    outer: f64,
    /// Outer contribution restricted to `|ξ| ≤ r_max/2`.
    outer_half: f64,
}

impl RayIntegral {
    fn total(&self) -> f64 {
        self.rings.iter().sum::<f64>() + self.outer
    }
}

/// Gap-graded breakpoints of the annulus holding ring `ell` along direction `theta`.
fn ring_breakpoints(h: &BulkHamiltonian, ell: usize, theta: f64) -> Vec<f64> {
    let (c, s) = (theta.cos(), theta.sin());
    let lo = if ell == 0 { 0.0 } else { ell as f64 - 0.5 };
    let hi = ell as f64 + 0.5;
    let dist = |r: f64| -> f64 {
        let es = crate::linalg::eigvals_hermitian(&h.matrix([r * c, r * s])).expect("Hermitian");
        es.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    };
    let margin = 0.05;
    let search_lo = if ell == 0 { 0.0 } else { lo + margin };
    let (center, min_val) = golden_section_min(dist, search_lo, hi - margin, 1e-13);
    let (center, scale) = if ell == 0 && dist(0.0) <= min_val { (0.0, dist(0.0)) } else { (center, min_val) };
    let width = (2.0 * scale).max(1e-14);
    let mut points = vec![lo, hi];
    if center > lo && center < hi {
        points.push(center);
    }
    let mut step = 0.5 * width;
    while step < 0.5 {
        for p in [center - step, center + step] {
            if p > lo && p < hi {
                points.push(p);
            }
        }
        step *= 3.0;
    }
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    points
}

fn outer_breakpoints(inner: f64, r_max: f64) -> (Vec<f64>, usize) {
    let half = 0.5 * r_max;
    let mut pts = vec![inner];
    let mut r = inner;
    let mut width = 0.5;
    while r + width < half {
        r += width;
        pts.push(r);
        width *= 1.6;
    }
    pts.push(half);
    let half_index = pts.len() - 1;
    let mut r = half;
    let width = width.min(0.25 * r_max);
    while r + width < r_max {
        r += width;
        pts.push(r);
    }
    pts.push(r_max);
    (pts, half_index)
}

fn integrate_panels(
    h: &BulkHamiltonian,
    theta: f64,
    edges: &[f64],
    rule: &(Vec<f64>, Vec<f64>),
) -> Result<Vec<f64>> {
    let (c, s) = (theta.cos(), theta.sin());
    edges
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let mut terms = Vec::with_capacity(rule.0.len());
            for (x, wt) in rule.0.iter().zip(&rule.1) {
                let r = mid + half * x;
                terms.push(wt * half * r * curvature_density(h, [r * c, r * s])?);
            }
            Ok(pairwise_sum(&terms))
        })
        .collect()
}

fn integrate_ray(h: &BulkHamiltonian, theta: f64, r_max: f64, rule: &(Vec<f64>, Vec<f64>)) -> Result<RayIntegral> {
    let rings_n = h.ring_count();
    let inner = rings_n as f64 - 0.5;
    if r_max <= inner {
        return Err(Error::InvalidInput(format!("r_max = {r_max} must exceed {inner}")));
    }
    let mut rings = Vec::with_capacity(rings_n);
    for ell in 0..rings_n {
        let edges = ring_breakpoints(h, ell, theta);
        rings.push(pairwise_sum(&integrate_panels(h, theta, &edges, rule)?));
    }
    let (edges, half_index) = outer_breakpoints(inner, r_max);
    let panels = integrate_panels(h, theta, &edges, rule)?;
    Ok(RayIntegral {
        rings,
        outer: pairwise_sum(&panels),
        outer_half: pairwise_sum(&panels[..half_index]),
    })
}

/// Angular trapezoid over rays at angles `2π(j + ½)/count`.
fn angular_sum(rays: &[RayIntegral], pick: impl Fn(&RayIntegral) -> f64) -> f64 {
    let values: Vec<f64> = rays.iter().map(pick).collect();
    pairwise_sum(&values) * 2.0 * PI / rays.len() as f64
}

/// `W = i/(8π²) ∫_{|ξ| ≤ r_max} T d²ξ` with ring-resolved contributions.
pub fn bulk_invariant(h: &BulkHamiltonian, quad: &QuadratureSpec) -> Result<InvariantEstimate> {
    if quad.min_angles < 2 || quad.radial_order < 3 {
        return Err(Error::InvalidInput("quadrature resolution too small".into()));
    }
    let fine_rule = gauss_legendre(quad.radial_order);
    let coarse_rule = gauss_legendre((2 * quad.radial_order).div_ceil(3));
    // Angles θ_j = θ₀ + 2πj/N nest under doubling; θ₀ keeps nodes off the coordinate axes.
    let angle = |j: usize, count: usize| ANGLE_OFFSET + 2.0 * PI * j as f64 / count as f64;
    let eval = |thetas: Vec<f64>, rule: &(Vec<f64>, Vec<f64>)| -> Result<Vec<RayIntegral>> {
        thetas.into_par_iter().map(|theta| integrate_ray(h, theta, quad.r_max, rule)).collect()
    };
    let ring_count = h.ring_count();
    let mut angles = quad.min_angles;
    let mut fine = eval((0..angles).map(|j| angle(j, angles)).collect(), &fine_rule)?;
    loop {
        // Coarse pass: every other ray with the lower-order rule.
        let coarse = eval((0..angles / 2).map(|j| angle(2 * j, angles)).collect(), &coarse_rule)?;
        let fine_total = angular_sum(&fine, RayIntegral::total);
        let coarse_total = angular_sum(&coarse, RayIntegral::total);
        let resolution_error = (fine_total - coarse_total).abs();
        if resolution_error <= quad.tol || angles * 2 > quad.max_angles {
            let outer = angular_sum(&fine, |r| r.outer);
            let mut rings: Vec<f64> = (0..ring_count).map(|l| angular_sum(&fine, |r| r.rings[l])).collect();
            rings[ring_count - 1] += outer;
            let outer_half = angular_sum(&fine, |r| r.outer_half);
            return Ok(InvariantEstimate {
                value: fine_total,
                rings,
                outer,
                error_estimate: resolution_error + 2.0 * (outer - outer_half).abs(),
                angles_used: angles,
            });
        }
        let added = eval((0..angles).map(|j| angle(2 * j + 1, 2 * angles)).collect(), &fine_rule)?;
        fine = fine.into_iter().zip(added).flat_map(|(a, b)| [a, b]).collect();
        angles *= 2;
    }
}

/// Bulk-difference invariant `W_diff = W_minus − W_plus` with ring-resolved contributions.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub w_plus: f64,
    pub w_minus: f64,
    pub w_diff: f64,
    /// `ℓ → ω_ℓ`, the difference restricted to the annulus around ring `ℓ`
    /// (the outermost annulus runs to `r_max`).
    pub ring_contributions: BTreeMap<usize, f64>,
    /// Part of the outermost contribution lying beyond `|ξ| = n + ½`.
    pub outer_contribution: f64,
    pub quadrature_error_estimate: f64,
}

pub fn bulk_difference(plus: &BulkHamiltonian, minus: &BulkHamiltonian, quad: &QuadratureSpec) -> Result<InvariantReport> {
    let (p, m) = (plus.model(), minus.model());
    if p.n != m.n || p.eps != m.eps || std::mem::discriminant(plus) != std::mem::discriminant(minus) {
        return Err(Error::InvalidInput("bulk difference needs models sharing n, eps and kind".into()));
    }
    let (wp, wm) = rayon::join(|| bulk_invariant(plus, quad), || bulk_invariant(minus, quad));
    let (wp, wm) = (wp?, wm?);
    let ring_contributions = wp.rings.iter().zip(&wm.rings).enumerate().map(|(l, (a, b))| (l, b - a)).collect();
    Ok(InvariantReport {
        w_plus: wp.value,
        w_minus: wm.value,
        w_diff: wm.value - wp.value,
        ring_contributions,
        outer_contribution: wm.outer - wp.outer,
        quadrature_error_estimate: wp.error_estimate + wm.error_estimate,
    })
}

/// Closed form and quadrature value of the winding invariant of
/// `H_p = cos(pθ+φ)σ₁ + sin(pθ+φ)σ₂ + τ r σ₃`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WindingInvariant {
    pub closed_form: f64,
    pub quadrature: f64,
}

/// Evaluates `(i/2π) ∫∫ −tr(H[∂_r H, ∂_θ H]) / (8|H|³) dr dθ` over `r ∈ ℝ`, `θ ∈ [0, 2π)`.
///
/// The closed form is `−p·sign(τ)`.
pub fn winding_family_invariant(p: i32, tau_sign: i32, phase: f64) -> Result<WindingInvariant> {
    if p == 0 {
        return Err(Error::InvalidInput("winding number p must be nonzero".into()));
    }
    if tau_sign != 1 && tau_sign != -1 {
        return Err(Error::InvalidInput("tau sign must be +1 or -1".into()));
    }
    let tau = tau_sign as f64;
    let combo = |a: [f64; 3]| crate::linalg::pauli_combination(a[0], a[1], a[2]);
    let angles = 64;
    let (nodes, weights) = gauss_legendre(64);
    let mut terms = Vec::with_capacity(angles * nodes.len());
    for j in 0..angles {
        let theta = 2.0 * PI * j as f64 / angles as f64;
        let arg = p as f64 * theta + phase;
        for (x, w) in nodes.iter().zip(&weights) {
            // r = tan(u)/|τ| with u ∈ (−π/2, π/2) maps the real line to a finite interval.
            let u = 0.5 * PI * x;
            let r = u.tan();
            let jac = 0.5 * PI / (u.cos() * u.cos());
            let h = combo([arg.cos(), arg.sin(), tau * r]);
            let dr = combo([0.0, 0.0, tau]);
            let dth = combo([-(p as f64) * arg.sin(), p as f64 * arg.cos(), 0.0]);
            let comm = &(&dr * &dth) - &(&dth * &dr);
            let tr = (&h * &comm).trace();
            let norm = (1.0 + r * r).sqrt();
            let density = C64::new(0.0, 1.0) / (2.0 * PI) * (-tr / (8.0 * norm.powi(3)));
            terms.push(density.re * w * jac * 2.0 * PI / angles as f64);
        }
    }
    Ok(WindingInvariant { closed_form: -(p as f64) * tau.signum(), quadrature: pairwise_sum(&terms) })
}

/// Stokes cross-check on the effective two-band model: `(i/2π) ∮_{|ξ|=R} (ψ₊, ∂_θψ₊) dθ`
/// for the positive-energy state in a gauge regular inside the disk.
pub fn connection_invariant_effective(model: &ReplicaModel, radius: f64, samples: usize) -> Result<f64> {
    let h = BulkHamiltonian::Effective(*model);
    // At the origin the positive state is the σ₃ eigenvector selected by the mass sign.
    let centre = eig_hermitian(&h.matrix([0.0, 0.0]))?;
    let dominant = if centre.vectors[(0, 1)].norm() >= centre.vectors[(1, 1)].norm() { 0 } else { 1 };
    let states: Vec<Vec<C64>> = (0..samples)
        .map(|j| {
            let th = 2.0 * PI * j as f64 / samples as f64;
            let es = eig_hermitian(&h.matrix([radius * th.cos(), radius * th.sin()]))?;
            let mut v = es.vector(1);
            let ph = v[dominant].conj() / v[dominant].norm();
            for z in v.iter_mut() {
                *z *= ph;
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    // Physics-convention holonomy Σ ln⟨ψ_j|ψ_{j+1}⟩ approximates ∮⟨ψ|∂ψ⟩ in this smooth gauge.
    let mut phys = ZERO;
    for j in 0..samples {
        let a = &states[j];
        let b = &states[(j + 1) % samples];
        let ov: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        phys += ov.ln();
    }
    // The first-slot-linear product is the complex conjugate.
    let maths = phys.conj();
    Ok((C64::new(0.0, 1.0) * maths / (2.0 * PI)).re)
}
