//! Time evolution of the driven Dirac model at constant mass parameter.
//!
//! The exact oracle integrates `i∂_τU = H(τ)U` with
//! `H(τ) = ξ·σ + ε(B e^{−iτ} + B* e^{iτ})`. The truncated evolutions read the
//! mode-0 block row of `exp(−iτĤ_n)`, and the effective evolution pairs
//! `exp(−iτ𝔥)` with a first-order fluctuation correction.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{ode_propagate_with, unitary_exp, ComplexMatrix, OdeOptions, C64, ZERO};
use crate::numeric::{gauss_legendre, loglog_slope, pairwise_sum};
use crate::replica::{bloch_hamiltonian, coupling_matrix, dirac_block, effective_2x2, BlochPoint, ReplicaModel};
use crate::{Error, Result};

/// Time-dependent 2×2 Bloch matrix `H(τ; ξ)`.
pub fn driven_hamiltonian(model: &ReplicaModel, xi: BlochPoint, tau: f64) -> ComplexMatrix {
    let b = coupling_matrix(model.m);
    let phase = C64::from_polar(model.eps, -tau);
    &dirac_block(xi) + &(&b.scale(phase) + &b.adjoint().scale(phase.conj()))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("evolution time must be finite and nonnegative, got {tau}")))
    }
}

/// Reference propagator `U(τ)` from the adaptive Runge–Kutta integrator.
pub fn exact_propagator(model: &ReplicaModel, xi: BlochPoint, tau: f64, tol: f64) -> Result<ComplexMatrix> {
    check_tau(tau)?;
    let opts = OdeOptions { tol, max_step: Some(0.25) };
    ode_propagate_with(|t| driven_hamiltonian(model, xi, t), 0.0, tau, opts)
}

/// `U_n(τ) = Σ_k [exp(−iτĤ_n)]_{0k}`, the sum of the 2×2 blocks in the mode-0 block row.
///
/// Not unitary in general.
pub fn truncated_propagator(model: &ReplicaModel, xi: BlochPoint, tau: f64, n_trunc: usize) -> Result<ComplexMatrix> {
    check_tau(tau)?;
    let replica = ReplicaModel { n: n_trunc, ..*model };
    let full = unitary_exp(&bloch_hamiltonian(&replica, xi), tau)?;
    let row = 2 * replica.block_of_mode(0);
    let mut sum = ComplexMatrix::zeros(2);
    for k in 0..replica.replicas() {
        sum = &sum + &full.block(row, 2 * k, 2);
    }
    Ok(sum)
}

/// Same quantity as [`truncated_propagator`], obtained by applying `exp(−iτĤ_n)` to the
/// stacked identity `(I, …, I)ᵀ` and reading the mode-0 block.
pub fn truncated_propagator_by_action(
    model: &ReplicaModel,
    xi: BlochPoint,
    tau: f64,
    n_trunc: usize,
) -> Result<ComplexMatrix> {
    check_tau(tau)?;
    let replica = ReplicaModel { n: n_trunc, ..*model };
    let full = unitary_exp(&bloch_hamiltonian(&replica, xi), tau)?;
    let row = 2 * replica.block_of_mode(0);
    let mut out = ComplexMatrix::zeros(2);
    for col in 0..2 {
        let stacked: Vec<C64> = (0..replica.dim()).map(|r| if r % 2 == col { C64::new(1.0, 0.0) } else { ZERO }).collect();
        let image = full.mul_vec(&stacked);
        out[(0, col)] = image[row];
        out[(1, col)] = image[row + 1];
    }
    Ok(out)
}

/// `U_n'(τ) = U_n(τ')·U_n(2π)^N` for `τ = 2πN + τ'`, `0 ≤ τ' < 2π`.
pub fn periodized_propagator(model: &ReplicaModel, xi: BlochPoint, tau: f64, n_trunc: usize) -> Result<ComplexMatrix> {
    check_tau(tau)?;
    let period = 2.0 * PI;
    let periods = (tau / period).floor();
    let mut remainder = tau - periods * period;
    let mut periods = periods as u64;
    // Guard against τ' rounding up to a full period.
    if remainder >= period {
        remainder -= period;
        periods += 1;
    }
    let head = truncated_propagator(model, xi, remainder, n_trunc)?;
    if periods == 0 {
        return Ok(head);
    }
    let mut power = ComplexMatrix::identity(2);
    let mut base = truncated_propagator(model, xi, period, n_trunc)?;
    let mut k = periods;
    while k > 0 {
        if k & 1 == 1 {
            power = &power * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    Ok(&head * &power)
}

/// First-order fluctuation `u(τ) = (e^{−iτ} − 1)B − (e^{iτ} − 1)B*`.
///
/// This is the interaction-picture first-order term of the drive,
/// `−i∫₀^τ (B e^{−is} + B* e^{is}) ds`; it vanishes at `τ = 0` and is 2π-periodic.
pub fn fluctuation(model: &ReplicaModel, tau: f64) -> ComplexMatrix {
    let b = coupling_matrix(model.m);
    let minus = C64::from_polar(1.0, -tau) - 1.0;
    let plus = C64::from_polar(1.0, tau) - 1.0;
    &b.scale(minus) - &b.adjoint().scale(plus)
}

/// `(U_𝔥(τ), u_𝔥(τ))` with `U_𝔥 = exp(−iτ𝔥)`; the corrected approximation is `U_𝔥 + εu_𝔥`.
pub fn effective_propagator(model: &ReplicaModel, xi: BlochPoint, tau: f64) -> Result<(ComplexMatrix, ComplexMatrix)> {
    check_tau(tau)?;
    let u = unitary_exp(&effective_2x2(model, xi), tau)?;
    Ok((u, fluctuation(model, tau)))
}

/// `‖U − U_𝔥 − εu_𝔥‖` (or `‖U − U_𝔥‖` when `with_fluctuation` is false) at one Bloch point.
pub fn effective_error(model: &ReplicaModel, xi: BlochPoint, tau: f64, tol: f64, with_fluctuation: bool) -> Result<f64> {
    let exact = exact_propagator(model, xi, tau, tol)?;
    Ok((&exact - &corrected_approximation(model, xi, tau, with_fluctuation)?).op_norm())
}

fn corrected_approximation(model: &ReplicaModel, xi: BlochPoint, tau: f64, with_fluctuation: bool) -> Result<ComplexMatrix> {
    let (u, fl) = effective_propagator(model, xi, tau)?;
    Ok(if with_fluctuation { &u + &fl.scale(C64::new(model.eps, 0.0)) } else { u })
}

/// Error bound `2(2‖B‖ετ)^{n+1}/(n+1)!` for the truncated evolution.
pub fn truncation_bound(n_trunc: usize, eps: f64, tau: f64, coupling_norm: f64) -> f64 {
    let order = n_trunc as i32 + 1;
    let factorial: f64 = (1..=order).map(f64::from).product();
    2.0 * (2.0 * coupling_norm * eps * tau).powi(order) / factorial
}

/// Default momentum sample: 40 points with `|ξ| ≤ 3`, half of them close to the
/// half-integer and integer radii where the drive is resonant.
pub fn default_xi_set() -> Vec<BlochPoint> {
    let golden = PI * (3.0 - 5.0_f64.sqrt());
    let mut radii: Vec<f64> = (0..20).map(|j| 3.0 * (j as f64 + 0.5) / 20.0).collect();
    for k in 1..=6 {
        let centre = 0.5 * k as f64;
        radii.push(centre - 0.01);
        radii.push((centre + 0.01).min(3.0));
    }
    radii.extend([0.0, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.6]);
    radii
        .into_iter()
        .enumerate()
        .map(|(j, r)| {
            let th = golden * j as f64;
            [r * th.cos(), r * th.sin()]
        })
        .collect()
}

/// Configuration of an ε-sweep for the truncated evolution.
#[derive(Clone, Debug, Serialize)]
pub struct EvolutionExperiment {
    pub model: ReplicaModel,
    pub xi_set: Vec<BlochPoint>,
    pub tau: f64,
    pub eps_sweep: Vec<f64>,
    pub n_trunc: usize,
    pub oracle_tol: f64,
}

/// Per-ε maxima over the momentum sample plus a log-log slope.
#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub eps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Theoretical bound at each ε, when one applies.
    pub bounds: Vec<f64>,
    pub slope: f64,
    /// Momentum points where the bound was exceeded, as `(ε, ξ, error, bound)`.
    pub violations: Vec<(f64, BlochPoint, f64, f64)>,
}

fn validate_sweep(eps_sweep: &[f64]) -> Result<()> {
    if eps_sweep.len() < 2 || eps_sweep.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidInput("an ε sweep needs at least two positive values".into()));
    }
    Ok(())
}

fn loglog_fit(eps: &[f64], errors: &[f64]) -> f64 {
    let floored: Vec<f64> = errors.iter().map(|e| e.max(f64::MIN_POSITIVE)).collect();
    loglog_slope(eps, &floored)
}

/// `max_ξ ‖U − U_n‖` for each ε, checked pointwise against [`truncation_bound`].
pub fn truncation_sweep(exp: &EvolutionExperiment) -> Result<SweepResult> {
    validate_sweep(&exp.eps_sweep)?;
    check_tau(exp.tau)?;
    let b_norm = coupling_matrix(exp.model.m).op_norm();
    let mut errors = Vec::new();
    let mut bounds = Vec::new();
    let mut violations = Vec::new();
    for &eps in &exp.eps_sweep {
        let model = exp.model.with_eps(eps);
        let per_point: Vec<f64> = exp
            .xi_set
            .par_iter()
            .map(|&xi| {
                let exact = exact_propagator(&model, xi, exp.tau, exp.oracle_tol)?;
                let approx = truncated_propagator(&model, xi, exp.tau, exp.n_trunc)?;
                Ok((&exact - &approx).op_norm())
            })
            .collect::<Result<_>>()?;
        let bound = truncation_bound(exp.n_trunc, eps, exp.tau, b_norm);
        for (xi, err) in exp.xi_set.iter().zip(&per_point) {
            if *err > bound {
                violations.push((eps, *xi, *err, bound));
            }
        }
        errors.push(per_point.iter().copied().fold(0.0, f64::max));
        bounds.push(bound);
    }
    let slope = loglog_fit(&exp.eps_sweep, &errors);
    Ok(SweepResult { eps: exp.eps_sweep.clone(), errors, bounds, slope, violations })
}

/// Momenta on the filter disk `|ξ| ≤ c₀ε^β`: rings at fractions of the radius, several angles.
pub fn filtered_momenta(eps: f64, beta: f64, c0: f64) -> Vec<BlochPoint> {
    let radius = c0 * eps.powf(beta);
    let mut pts = vec![[0.0, 0.0]];
    for frac in [0.25, 0.5, 0.75, 1.0] {
        for j in 0..8 {
            let th = 2.0 * PI * j as f64 / 8.0;
            pts.push([frac * radius * th.cos(), frac * radius * th.sin()]);
        }
    }
    pts
}

/// `max ‖(U − U_𝔥 − εu_𝔥)v‖` over unit `v` supported on `|ξ| ≤ c₀ε^β`, for each ε.
pub fn corrected_sweep(
    model: &ReplicaModel,
    eps_sweep: &[f64],
    beta: f64,
    c0: f64,
    tau: f64,
    tol: f64,
    with_fluctuation: bool,
) -> Result<SweepResult> {
    validate_sweep(eps_sweep)?;
    let mut errors = Vec::new();
    for &eps in eps_sweep {
        let m = model.with_eps(eps);
        let per_point: Vec<f64> = filtered_momenta(eps, beta, c0)
            .par_iter()
            .map(|&xi| effective_error(&m, xi, tau, tol, with_fluctuation))
            .collect::<Result<_>>()?;
        errors.push(per_point.into_iter().fold(0.0, f64::max));
    }
    let slope = loglog_fit(eps_sweep, &errors);
    Ok(SweepResult { eps: eps_sweep.to_vec(), errors, bounds: Vec::new(), slope, violations: Vec::new() })
}

/// Long-time comparison of the periodized evolution against the oracle.
#[derive(Clone, Debug, Serialize)]
pub struct LongTimeCheck {
    pub eps: f64,
    pub tau: f64,
    pub max_error: f64,
    /// Smallest `c` with `max_error ≤ c(τ+1)ε^{n+1}e^{cτε^{n+1}}`.
    pub fitted_constant: f64,
    /// Reference constant `2(4π)^{n+1}/(2π(n+1)!)`.
    pub reference_constant: f64,
}

pub fn long_time_reference_constant(n_trunc: usize) -> f64 {
    let order = n_trunc as i32 + 1;
    let factorial: f64 = (1..=order).map(f64::from).product();
    2.0 * (4.0 * PI).powi(order) / (2.0 * PI * factorial)
}

/// Evaluates `max_ξ ‖U − U_n'‖` at `τ` and fits the envelope constant.
pub fn long_time_check(
    model: &ReplicaModel,
    xi_set: &[BlochPoint],
    tau: f64,
    n_trunc: usize,
    tol: f64,
) -> Result<LongTimeCheck> {
    check_tau(tau)?;
    let per_point: Vec<f64> = xi_set
        .par_iter()
        .map(|&xi| {
            let exact = exact_propagator(model, xi, tau, tol)?;
            let approx = periodized_propagator(model, xi, tau, n_trunc)?;
            Ok((&exact - &approx).op_norm())
        })
        .collect::<Result<_>>()?;
    let max_error = per_point.into_iter().fold(0.0, f64::max);
    let small = model.eps.powi(n_trunc as i32 + 1);
    let envelope = |c: f64| c * (tau + 1.0) * small * (c * tau * small).exp();
    // The envelope is increasing in c; bisect for the crossing.
    let (mut lo, mut hi) = (0.0, 1.0);
    while envelope(hi) < max_error {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if envelope(mid) >= max_error {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(LongTimeCheck {
        eps: model.eps,
        tau,
        max_error,
        fitted_constant: hi,
        reference_constant: long_time_reference_constant(n_trunc),
    })
}

/// Momentum-space profile of a wave packet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PacketProfile {
    /// Gaussian momentum density of unit width, truncated at `cutoff` widths.
    Gaussian { cutoff: f64 },
}

/// Packet `ψ_α(x) = ε^α ψ(ε^α x)` carrying a fixed spinor.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PacketSpec {
    pub alpha: f64,
    pub profile: PacketProfile,
    /// Spinor (normalised internally).
    pub spinor: [C64; 2],
    pub radial_nodes: usize,
    pub angular_nodes: usize,
}

impl PacketSpec {
    pub fn gaussian(alpha: f64) -> Self {
        Self {
            alpha,
            profile: PacketProfile::Gaussian { cutoff: 6.0 },
            spinor: [C64::new(1.0, 0.0), ZERO],
            radial_nodes: 24,
            angular_nodes: 12,
        }
    }
}

/// L² norm of `(U − U_𝔥 − εu_𝔥)ψ_α` for a unit-norm packet.
///
/// The packet's Fourier transform is `ε^{−α}φ(ξ/ε^α)`, so the momentum spread
/// shrinks as `ε^α`. Each Bloch component is evolved independently.
pub fn wavepacket_error(model: &ReplicaModel, packet: &PacketSpec, tau: f64, tol: f64) -> Result<f64> {
    if !(packet.alpha > 0.0) {
        return Err(Error::InvalidInput(format!("packet scaling alpha must be positive, got {}", packet.alpha)));
    }
    check_tau(tau)?;
    if packet.radial_nodes == 0 || packet.angular_nodes == 0 {
        return Err(Error::InvalidInput("packet quadrature needs nodes".into()));
    }
    let PacketProfile::Gaussian { cutoff } = packet.profile;
    let width = model.eps.powf(packet.alpha);
    let spin_norm = (packet.spinor[0].norm_sqr() + packet.spinor[1].norm_sqr()).sqrt();
    if !(spin_norm > 0.0) {
        return Err(Error::InvalidInput("packet spinor must be nonzero".into()));
    }
    let spinor = [packet.spinor[0] / spin_norm, packet.spinor[1] / spin_norm];
    let (nodes, weights) = gauss_legendre(packet.radial_nodes);
    let r_max = cutoff * width;
    let mut cells = Vec::new();
    for (x, w) in nodes.iter().zip(&weights) {
        let r = 0.5 * r_max * (x + 1.0);
        let density = (-(r / width).powi(2)).exp();
        for j in 0..packet.angular_nodes {
            let th = 2.0 * PI * (j as f64 + 0.5) / packet.angular_nodes as f64;
            let weight = 0.5 * r_max * w * r * density * 2.0 * PI / packet.angular_nodes as f64;
            cells.push(([r * th.cos(), r * th.sin()], weight));
        }
    }
    let contributions: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|&(xi, weight)| {
            let exact = exact_propagator(model, xi, tau, tol)?;
            let diff = &exact - &corrected_approximation(model, xi, tau, true)?;
            let v = diff.mul_vec(&spinor);
            let err2 = v[0].norm_sqr() + v[1].norm_sqr();
            Ok((weight * err2, weight))
        })
        .collect::<Result<_>>()?;
    let num: Vec<f64> = contributions.iter().map(|c| c.0).collect();
    let den: Vec<f64> = contributions.iter().map(|c| c.1).collect();
    // Dividing by the discrete norm enforces ‖ψ_α‖ = 1 on the grid.
    Ok((pairwise_sum(&num) / pairwise_sum(&den)).sqrt())
}
