//! Interface ribbons: the driven Dirac model with a mass profile `m(y)` that
//! changes sign, discretised on a periodic `y` grid at fixed `ξ_x`.
//!
//! The periodic domain `[−L, L)` carries two interfaces. Interface 1 sits at
//! `y = 0`, where `m` increases for `m₀ > 0`. Interface 2 sits at `y = ±L`.
//!
//! The conductivity is obtained by spectral flow. In-gap branches are
//! followed across `ξ_x`, and their signed zero crossings are counted at each
//! interface. The interfaces hybridise through the bulk when the domain is
//! short compared to the decay length, so states are first diabatised. The
//! window is split into the parts living near each interface, and `H` is
//! diagonalised within each part.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{eig_hermitian, eig_hermitian_window, ComplexMatrix, C64, ZERO};
use crate::numeric::golden_section_min;
use crate::replica::{coupling_matrix, distance_to_zero, ReplicaModel, MAX_EPS};
use crate::{Error, Result};

/// Shape of the mass interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileShape {
    Tanh,
    Erf,
    /// `m ≡ m₀`; no interface, used to compare against bulk bands.
    Constant,
}

/// `m(y) = m₀ s(y/w)` with `s` odd and saturating.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassProfile {
    pub shape: ProfileShape,
    pub m0: f64,
    pub width: f64,
}

impl MassProfile {
    pub fn new(shape: ProfileShape, m0: f64, width: f64) -> Result<Self> {
        if !(m0.abs() > 0.0 && m0.abs() <= 1.0) {
            return Err(Error::InvalidInput(format!("mass amplitude m0 = {m0} must satisfy 0 < |m0| <= 1")));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidInput(format!("interface width must be positive, got {width}")));
        }
        Ok(Self { shape, m0, width })
    }

    pub fn tanh(m0: f64, width: f64) -> Result<Self> {
        Self::new(ProfileShape::Tanh, m0, width)
    }

    fn unit(&self, s: f64) -> f64 {
        match self.shape {
            ProfileShape::Tanh => s.tanh(),
            ProfileShape::Erf => libm::erf(s),
            ProfileShape::Constant => 1.0,
        }
    }

    /// Single-interface profile on the line.
    pub fn value(&self, y: f64) -> f64 {
        self.m0 * self.unit(y / self.width)
    }

    /// Radius beyond which `|m|` is within 0.5% of `m₀`.
    pub fn plateau_radius(&self) -> f64 {
        match self.shape {
            ProfileShape::Tanh => 3.0 * self.width,
            ProfileShape::Erf => 2.0 * self.width,
            ProfileShape::Constant => 0.0,
        }
    }

    /// Two-interface continuation `m₀ s(y/w) s((L−|y|)/w)` on `[−L, L)`.
    pub fn periodized(&self, y: f64, half_length: f64) -> f64 {
        self.value(y) * self.unit((half_length - y.abs()) / self.width)
    }

    pub fn with_width(&self, width: f64) -> Self {
        Self { width, ..*self }
    }
}

/// Uniform periodic grid `y_j = −L + 2Lj/N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RibbonGrid {
    pub half_length: f64,
    pub points: usize,
}

impl RibbonGrid {
    pub fn new(half_length: f64, points: usize) -> Result<Self> {
        if points < 4 || points % 2 != 0 {
            return Err(Error::InvalidInput(format!("grid size must be even and at least 4, got {points}")));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::InvalidInput(format!("half-length must be positive, got {half_length}")));
        }
        Ok(Self { half_length, points })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    pub fn position(&self, j: usize) -> f64 {
        -self.half_length + self.spacing() * j as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.position(j)).collect()
    }

    /// Wavenumbers `2πk/(2L)` for `k = −N/2+1, …, N/2`; the Nyquist mode is taken positive.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points as i64;
        (-n / 2 + 1..=n / 2).map(|k| PI * k as f64 / self.half_length).collect()
    }

    /// Spectral representation of `(1/i) d/dy`: `D = F⁻¹ diag(k) F`.
    pub fn derivative_matrix(&self) -> ComplexMatrix {
        let n = self.points;
        let ks = self.wavenumbers();
        let h = self.spacing();
        // D is circulant: D_{jl} = (1/N) Σ_k k e^{ik(y_j − y_l)}.
        let column: Vec<C64> = (0..n)
            .map(|r| {
                let dy = h * r as f64;
                ks.iter().map(|&k| C64::from_polar(k, k * dy)).sum::<C64>() / n as f64
            })
            .collect();
        ComplexMatrix::from_fn(n, |j, l| column[(j + n - l) % n])
    }

    /// Distances of `y` to interface 1 (`y = 0`) and interface 2 (`y = ±L`).
    pub fn interface_distances(&self, y: f64) -> (f64, f64) {
        (y.abs(), self.half_length - y.abs())
    }
}

/// Smooth bump potential near one interface, with seeded random spin structure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalPerturbation {
    pub seed: u64,
    /// Largest operator norm of the on-site 2×2 potential.
    pub amplitude: f64,
    pub center: f64,
    /// Support half-width; the bump vanishes identically beyond it.
    pub radius: f64,
}

impl LocalPerturbation {
    /// On-site coefficients `(a₀, a₁, a₂, a₃)` of `a₀I + a·σ`, scaled so `|a₀| + |a| = amplitude`.
    fn coefficients(&self) -> [f64; 4] {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let raw: [f64; 4] = [0; 4].map(|_| rng.gen_range(-1.0..1.0));
        let vec_norm = (raw[1] * raw[1] + raw[2] * raw[2] + raw[3] * raw[3]).sqrt();
        let total = raw[0].abs() + vec_norm;
        raw.map(|c| c * self.amplitude / total)
    }

    fn bump(&self, y: f64) -> f64 {
        let s = (y - self.center) / self.radius;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    }

    /// On-site 2×2 matrices along the grid.
    pub fn onsite(&self, grid: &RibbonGrid) -> Vec<ComplexMatrix> {
        let [a0, a1, a2, a3] = self.coefficients();
        grid.positions()
            .into_iter()
            .map(|y| {
                let b = self.bump(y);
                let mut m = crate::linalg::pauli_combination(a1 * b, a2 * b, a3 * b);
                m[(0, 0)] += a0 * b;
                m[(1, 1)] += a0 * b;
                m
            })
            .collect()
    }
}

/// Which Hamiltonian is placed on the ribbon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RibbonKind {
    /// `(2n+1)`-replica matrix with `B(y) = ½(1+m)B₀ + ½(1−m)B₀*`.
    Replica,
    /// Two-band model `ξ_xσ₁ + D_yσ₂ − ε²m(y)σ₃`.
    Effective,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RibbonModel {
    pub kind: RibbonKind,
    pub n: usize,
    pub eps: f64,
    pub profile: MassProfile,
    pub grid: RibbonGrid,
    pub perturbation: Option<LocalPerturbation>,
}

impl RibbonModel {
    pub fn new(kind: RibbonKind, n: usize, eps: f64, profile: MassProfile, grid: RibbonGrid) -> Result<Self> {
        if !(eps > 0.0 && eps <= MAX_EPS) {
            return Err(Error::InvalidInput(format!("eps = {eps} must lie in (0, {MAX_EPS}]")));
        }
        if kind == RibbonKind::Effective && n != 0 {
            return Err(Error::InvalidInput("the effective ribbon has no replica index; use n = 0".into()));
        }
        let scale = profile.plateau_radius().max(profile.width);
        if profile.shape != ProfileShape::Constant && grid.half_length < 8.0 * scale {
            return Err(Error::InvalidInput(format!(
                "half-length {} must be at least 8 x max(plateau radius, width) = {}",
                grid.half_length,
                8.0 * scale
            )));
        }
        Ok(Self { kind, n, eps, profile, grid, perturbation: None })
    }

    pub fn with_perturbation(self, perturbation: LocalPerturbation) -> Self {
        Self { perturbation: Some(perturbation), ..self }
    }

    pub fn with_profile(self, profile: MassProfile) -> Self {
        Self { profile, ..self }
    }

    pub fn with_grid(self, grid: RibbonGrid) -> Self {
        Self { grid, ..self }
    }

    pub fn replicas(&self) -> usize {
        match self.kind {
            RibbonKind::Replica => 2 * self.n + 1,
            RibbonKind::Effective => 1,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.replicas() * self.grid.points
    }

    pub fn mass_values(&self) -> Vec<f64> {
        self.grid.positions().into_iter().map(|y| self.profile.periodized(y, self.grid.half_length)).collect()
    }

    /// Radius around each interface used to attribute states:
    /// `max(4w, 3/(ε²|m₀|))`, capped at `L/2`.
    pub fn localization_radius(&self) -> f64 {
        let decay = 3.0 / (self.eps * self.eps * self.profile.m0.abs());
        (4.0 * self.profile.width).max(decay).min(0.5 * self.grid.half_length)
    }

    /// Half-width of the bulk gap of the asymptotic models `m = ±m₀`.
    pub fn bulk_half_gap(&self) -> f64 {
        match self.kind {
            RibbonKind::Effective => self.eps * self.eps * self.profile.m0.abs(),
            RibbonKind::Replica => {
                let mut best = f64::INFINITY;
                for sign in [1.0, -1.0] {
                    let model = ReplicaModel { n: self.n, m: sign * self.profile.m0, eps: self.eps };
                    for ell in 0..=self.n {
                        best = best.min(ring_half_gap(&model, ell));
                    }
                }
                best
            }
        }
    }
}

fn ring_half_gap(model: &ReplicaModel, ell: usize) -> f64 {
    let lo = if ell == 0 { 0.0 } else { ell as f64 - 0.45 };
    let hi = ell as f64 + 0.45;
    (0..8)
        .map(|j| {
            let th = PI * j as f64 / 8.0;
            let f = |r: f64| distance_to_zero(model, [r * th.cos(), r * th.sin()]);
            let (_, v) = golden_section_min(f, lo, hi, 1e-12);
            v.min(f(lo.max(0.0)))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Assembles the ribbon matrix at momentum `ξ_x`.
///
/// Index layout: replica block `a` (mode `n − a`), site `j`, spin `s` at `a·2N + 2j + s`.
pub fn build_ribbon(model: &RibbonModel, xi_x: f64) -> ComplexMatrix {
    let derivative = model.grid.derivative_matrix();
    build_with_derivative(model, xi_x, &derivative)
}

fn build_with_derivative(model: &RibbonModel, xi_x: f64, derivative: &ComplexMatrix) -> ComplexMatrix {
    let n_sites = model.grid.points;
    let replicas = model.replicas();
    let block = 2 * n_sites;
    let mut h = ComplexMatrix::zeros(model.dim());
    let masses = model.mass_values();
    let onsite = model.perturbation.map(|p| p.onsite(&model.grid));
    let i = C64::new(0.0, 1.0);
    for a in 0..replicas {
        let base = a * block;
        let shift = match model.kind {
            RibbonKind::Replica => model.n as f64 - a as f64,
            RibbonKind::Effective => 0.0,
        };
        for j in 0..n_sites {
            for l in 0..n_sites {
                // D ⊗ σ₂
                let d = derivative[(j, l)];
                h[(base + 2 * j, base + 2 * l + 1)] += -i * d;
                h[(base + 2 * j + 1, base + 2 * l)] += i * d;
            }
            let r = base + 2 * j;
            h[(r, r + 1)] += C64::new(xi_x, 0.0);
            h[(r + 1, r)] += C64::new(xi_x, 0.0);
            h[(r, r)] += C64::new(shift, 0.0);
            h[(r + 1, r + 1)] += C64::new(shift, 0.0);
            if model.kind == RibbonKind::Effective {
                let mass = -model.eps * model.eps * masses[j];
                h[(r, r)] += C64::new(mass, 0.0);
                h[(r + 1, r + 1)] -= C64::new(mass, 0.0);
            }
            if let Some(pot) = &onsite {
                for s in 0..2 {
                    for t in 0..2 {
                        h[(r + s, r + t)] += pot[j][(s, t)];
                    }
                }
            }
        }
        if a + 1 < replicas {
            let lower = base + block;
            for (j, &mj) in masses.iter().enumerate() {
                let b = coupling_matrix(mj).scale(C64::new(model.eps, 0.0));
                for s in 0..2 {
                    for t in 0..2 {
                        h[(lower + 2 * j + s, base + 2 * j + t)] = b[(s, t)];
                        h[(base + 2 * j + t, lower + 2 * j + s)] = b[(s, t)].conj();
                    }
                }
            }
        }
    }
    h
}

/// Probability weights of a state near interface 1, near interface 2, and elsewhere.
fn interface_weights(vector: &[C64], grid: &RibbonGrid, radius: f64) -> [f64; 3] {
    let block = 2 * grid.points;
    let mut w = [0.0; 3];
    for (idx, z) in vector.iter().enumerate() {
        let site = (idx % block) / 2;
        let (d1, d2) = grid.interface_distances(grid.position(site));
        let p = z.norm_sqr();
        if d1 <= radius && d1 <= d2 {
            w[0] += p;
        } else if d2 <= radius {
            w[1] += p;
        } else {
            w[2] += p;
        }
    }
    let total: f64 = w.iter().sum();
    w.map(|x| x / total)
}

/// One retained in-gap eigenstate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EdgeState {
    pub xi_x: f64,
    pub energy: f64,
    /// 1 or 2.
    pub interface: u8,
    /// Weights near interface 1, interface 2, and in the bulk; they sum to 1.
    pub weights: [f64; 3],
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeSpectrum {
    pub xi_grid: Vec<f64>,
    pub e_win: f64,
    pub localization_radius: f64,
    pub states: Vec<EdgeState>,
}

fn check_window(model: &RibbonModel, e_win: f64) -> Result<()> {
    if !(e_win >= 0.0 && e_win.is_finite()) {
        return Err(Error::InvalidInput(format!("energy window must be nonnegative, got {e_win}")));
    }
    let bulk_gap = model.bulk_half_gap();
    if e_win >= bulk_gap {
        return Err(Error::WindowOutsideGap { e_win, bulk_gap });
    }
    Ok(())
}

/// In-gap eigenvalues with interface attribution on a fixed `ξ_x` grid.
///
/// States with more than half their weight away from both interfaces are dropped.
pub fn edge_spectrum(model: &RibbonModel, xi_grid: &[f64], e_win: f64) -> Result<EdgeSpectrum> {
    check_window(model, e_win)?;
    let radius = model.localization_radius();
    let mut out = EdgeSpectrum { xi_grid: xi_grid.to_vec(), e_win, localization_radius: radius, states: Vec::new() };
    if e_win == 0.0 {
        return Ok(out);
    }
    let derivative = model.grid.derivative_matrix();
    let per_point: Vec<Vec<EdgeState>> = xi_grid
        .par_iter()
        .map(|&xi_x| {
            let h = build_with_derivative(model, xi_x, &derivative);
            let window = eig_hermitian_window(&h, -e_win, e_win)?;
            Ok(window
                .values
                .iter()
                .zip(&window.vectors)
                .filter_map(|(&energy, v)| {
                    let weights = interface_weights(v, &model.grid, radius);
                    (weights[2] <= 0.5).then(|| EdgeState {
                        xi_x,
                        energy,
                        interface: if weights[0] >= weights[1] { 1 } else { 2 },
                        weights,
                    })
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    out.states = per_point.into_iter().flatten().collect();
    Ok(out)
}

/// Settings for the spectral-flow sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlowOptions {
    pub xi_min: f64,
    pub xi_max: f64,
    /// Initial spacing; intervals are bisected as needed.
    pub initial_step: f64,
    pub e_win: f64,
    /// Minimum overlap for matching states at neighbouring momenta.
    pub overlap_threshold: f64,
    pub max_depth: u32,
}

impl FlowOptions {
    /// Momentum range covering every ring of the model, with a fraction of the bulk half-gap as window.
    pub fn for_model(model: &RibbonModel) -> Self {
        let reach = match model.kind {
            RibbonKind::Replica => model.n as f64 + 0.6,
            RibbonKind::Effective => 0.6,
        };
        Self {
            xi_min: -reach,
            xi_max: reach,
            initial_step: 0.05,
            e_win: 0.75 * model.bulk_half_gap(),
            overlap_threshold: 0.7,
            max_depth: 12,
        }
    }
}

/// A zero crossing of a tracked branch.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Crossing {
    /// Midpoint of the bracketing interval.
    pub xi_x: f64,
    pub interface: u8,
    /// Sign of `dE/dξ_x` at the crossing.
    pub direction: i8,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowReport {
    /// `2πσ_I` at interfaces 1 and 2.
    pub conductivity: [i64; 2],
    pub crossings: Vec<Crossing>,
    pub evaluations: usize,
}

impl FlowReport {
    pub fn at(&self, interface: u8) -> i64 {
        self.conductivity[usize::from(interface == 2)]
    }
}

#[derive(Clone, Debug)]
struct DiabaticState {
    energy: f64,
    vector: Vec<C64>,
}

#[derive(Clone, Debug)]
struct Sample {
    /// Smallest `|E|` of any eigenvalue, or the window size when none lies inside it.
    min_abs: f64,
    /// Diabatic states attributed to interface 1 and interface 2.
    sets: [Vec<DiabaticState>; 2],
}

/// Window eigenstates, split between the two halves of the domain and re-diagonalised in each.
fn diabatic_sample(h: &ComplexMatrix, grid: &RibbonGrid, e_win: f64) -> Result<Sample> {
    let window = eig_hermitian_window(h, -e_win, e_win)?;
    let k = window.values.len();
    let min_abs = window.values.iter().map(|v| v.abs()).fold(e_win, f64::min);
    if k == 0 {
        return Ok(Sample { min_abs, sets: [Vec::new(), Vec::new()] });
    }
    let block = 2 * grid.points;
    let near_first: Vec<bool> = (0..h.dim())
        .map(|idx| {
            let (d1, d2) = grid.interface_distances(grid.position((idx % block) / 2));
            d1 <= d2
        })
        .collect();
    let projector = ComplexMatrix::from_fn(k, |a, b| {
        window.vectors[a]
            .iter()
            .zip(&window.vectors[b])
            .zip(&near_first)
            .filter(|(_, &inside)| inside)
            .map(|((x, y), _)| x.conj() * y)
            .sum()
    });
    let split = eig_hermitian(&projector)?;
    let mut sets: [Vec<DiabaticState>; 2] = [Vec::new(), Vec::new()];
    for (target, side) in sets.iter_mut().zip([true, false]) {
        let cols: Vec<usize> = (0..k).filter(|&c| (split.values[c] > 0.5) == side).collect();
        if cols.is_empty() {
            continue;
        }
        // H restricted to the subspace spanned by V·c for the selected columns c.
        let sub = ComplexMatrix::from_fn(cols.len(), |a, b| {
            (0..k)
                .map(|r| split.vectors[(r, cols[a])].conj() * split.vectors[(r, cols[b])] * window.values[r])
                .sum()
        });
        let local = eig_hermitian(&sub)?;
        for q in 0..cols.len() {
            let mut vector = vec![ZERO; h.dim()];
            for (a, &c) in cols.iter().enumerate() {
                let coeff = local.vectors[(a, q)];
                for r in 0..k {
                    let w = split.vectors[(r, c)] * coeff;
                    for (dst, src) in vector.iter_mut().zip(&window.vectors[r]) {
                        *dst += src * w;
                    }
                }
            }
            target.push(DiabaticState { energy: local.values[q], vector });
        }
    }
    Ok(Sample { min_abs, sets })
}

const CERTIFICATE_MARGIN: f64 = 1.25;

enum IntervalOutcome {
    /// No branch can cross zero inside the interval.
    Clear,
    Counted(Vec<Crossing>),
    /// Needs refinement; carries the worst overlap among required matches.
    Refine(f64),
}

fn overlap(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm()
}

fn examine_interval(a: f64, b: f64, left: &Sample, right: &Sample, opts: &FlowOptions) -> IntervalOutcome {
    let width = b - a;
    // |dE/dξ_x| ≤ ‖∂H/∂ξ_x‖ = 1, so a crossing needs |E| ≤ distance at both ends. Dirac edge
    // branches saturate this bound, hence the margin.
    if left.min_abs + right.min_abs > CERTIFICATE_MARGIN * width {
        return IntervalOutcome::Clear;
    }
    if width > opts.e_win {
        return IntervalOutcome::Refine(1.0);
    }
    let mut crossings = Vec::new();
    let mut worst = f64::INFINITY;
    let mut unmatched = false;
    for iface in 0..2 {
        let (ls, rs) = (&left.sets[iface], &right.sets[iface]);
        let mut candidates: Vec<(f64, f64, usize, usize)> = Vec::new();
        for (p, l) in ls.iter().enumerate() {
            for (q, r) in rs.iter().enumerate() {
                let ov = overlap(&l.vector, &r.vector);
                if ov > opts.overlap_threshold {
                    candidates.push((ov, (l.energy - r.energy).abs(), p, q));
                }
            }
        }
        candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)));
        let mut left_match = vec![None; ls.len()];
        let mut right_used = vec![false; rs.len()];
        for &(_, _, p, q) in &candidates {
            if left_match[p].is_none() && !right_used[q] {
                left_match[p] = Some(q);
                right_used[q] = true;
            }
        }
        for (p, l) in ls.iter().enumerate() {
            if l.energy.abs() <= width && left_match[p].is_none() {
                let best = rs.iter().map(|r| overlap(&l.vector, &r.vector)).fold(0.0, f64::max);
                worst = worst.min(best);
                unmatched = true;
            }
        }
        for (q, r) in rs.iter().enumerate() {
            if r.energy.abs() <= width && !right_used[q] {
                let best = ls.iter().map(|l| overlap(&l.vector, &r.vector)).fold(0.0, f64::max);
                worst = worst.min(best);
                unmatched = true;
            }
        }
        for (p, m) in left_match.iter().enumerate() {
            if let Some(q) = *m {
                let (e0, e1) = (ls[p].energy, rs[q].energy);
                if (e0 < 0.0) != (e1 < 0.0) {
                    crossings.push(Crossing {
                        xi_x: 0.5 * (a + b),
                        interface: iface as u8 + 1,
                        direction: if e1 > e0 { 1 } else { -1 },
                    });
                }
            }
        }
    }
    if unmatched {
        IntervalOutcome::Refine(worst)
    } else {
        IntervalOutcome::Counted(crossings)
    }
}

/// `2πσ_I` at both interfaces from the signed zero crossings of in-gap branches.
///
/// The conductivity at an interface is minus the net number of crossings with
/// `dE/dξ_x > 0` localised there.
pub fn spectral_flow(model: &RibbonModel, opts: &FlowOptions) -> Result<FlowReport> {
    check_window(model, opts.e_win)?;
    if !(opts.e_win > 0.0) || !(opts.initial_step > 0.0) || !(opts.xi_max > opts.xi_min) {
        return Err(Error::InvalidInput("spectral flow needs a positive window, step and range".into()));
    }
    let derivative = model.grid.derivative_matrix();
    let sample_at = |x: f64| -> Result<Sample> {
        diabatic_sample(&build_with_derivative(model, x, &derivative), &model.grid, opts.e_win)
    };
    run_flow(sample_at, opts)
}

/// `2πσ_I` at one interface.
pub fn spectral_flow_conductivity(model: &RibbonModel, opts: &FlowOptions, interface: u8) -> Result<i64> {
    if interface != 1 && interface != 2 {
        return Err(Error::InvalidInput(format!("interface must be 1 or 2, got {interface}")));
    }
    Ok(spectral_flow(model, opts)?.at(interface))
}

/// Spectral flow for an arbitrary two-band ribbon operator `ξ_xσ₁ + h(ξ_x)` built by the caller.
pub fn spectral_flow_with<F>(build: F, grid: &RibbonGrid, opts: &FlowOptions) -> Result<FlowReport>
where
    F: Fn(f64) -> ComplexMatrix + Sync,
{
    if !(opts.e_win > 0.0) || !(opts.initial_step > 0.0) || !(opts.xi_max > opts.xi_min) {
        return Err(Error::InvalidInput("spectral flow needs a positive window, step and range".into()));
    }
    run_flow(|x| diabatic_sample(&build(x), grid, opts.e_win), opts)
}

fn run_flow<S>(sample_at: S, opts: &FlowOptions) -> Result<FlowReport>
where
    S: Fn(f64) -> Result<Sample> + Sync,
{
    // Offsetting the grid keeps nodes away from symmetric points such as ξ_x = 0.
    let count = ((opts.xi_max - opts.xi_min) / opts.initial_step).ceil() as usize;
    let mut points: Vec<f64> = (0..=count).map(|i| opts.xi_min + opts.initial_step * (i as f64 + 0.37)).collect();
    points.retain(|&x| x <= opts.xi_max + opts.initial_step);
    let mut cache: BTreeMap<u64, Sample> = BTreeMap::new();
    let evaluate = |xs: &[f64], cache: &mut BTreeMap<u64, Sample>| -> Result<()> {
        let todo: Vec<f64> = xs.iter().copied().filter(|x| !cache.contains_key(&x.to_bits())).collect();
        let fresh: Vec<Sample> = todo.par_iter().map(|&x| sample_at(x)).collect::<Result<_>>()?;
        for (x, s) in todo.into_iter().zip(fresh) {
            cache.insert(x.to_bits(), s);
        }
        Ok(())
    };
    evaluate(&points, &mut cache)?;
    let mut pending: Vec<(f64, f64, u32)> = points.windows(2).map(|w| (w[0], w[1], 0)).collect();
    let mut crossings = Vec::new();
    while !pending.is_empty() {
        let mut next = Vec::new();
        let mut midpoints = Vec::new();
        for &(a, b, depth) in &pending {
            let outcome = examine_interval(a, b, &cache[&a.to_bits()], &cache[&b.to_bits()], opts);
            match outcome {
                IntervalOutcome::Clear => {}
                IntervalOutcome::Counted(found) => crossings.extend(found),
                IntervalOutcome::Refine(overlap) => {
                    if depth >= opts.max_depth {
                        return Err(Error::TrackingAmbiguity { xi_x: 0.5 * (a + b), overlap });
                    }
                    let mid = 0.5 * (a + b);
                    midpoints.push(mid);
                    next.push((a, mid, depth + 1));
                    next.push((mid, b, depth + 1));
                }
            }
        }
        evaluate(&midpoints, &mut cache)?;
        pending = next;
    }
    crossings.sort_by(|x, y| x.xi_x.total_cmp(&y.xi_x));
    let mut conductivity = [0i64; 2];
    for c in &crossings {
        conductivity[usize::from(c.interface - 1)] -= i64::from(c.direction);
    }
    Ok(FlowReport { conductivity, crossings, evaluations: cache.len() })
}

