//! High-frequency averaging of the driven Dirac operator
//! `H_ε(t) = D·σ + ε⁻¹(f₁(t/ε)σ₁ + f₀(t/ε)v(y))`.
//!
//! The fast part is removed exactly by `U₋₁(τ) = e^{−iF₀v}(cos F₁ − i sin F₁ σ₁)`.
//! In the rotated frame the generator is
//! `H̃(τ) = (cos 2F₁ σ₂ − sin 2F₁ σ₃)(D_y − F₀v') + ξ_xσ₁`,
//! whose period average is `ξ_xσ₁ + Y D_y + M v'`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{ode_propagate_state, pauli, unitary_exp, ComplexMatrix, OdeOptions, C64, I, ZERO};
use crate::numeric::{loglog_slope, pairwise_sum};
use crate::ribbon::{spectral_flow_with, FlowOptions, MassProfile, RibbonGrid};
use crate::{Error, Result};

/// Zero-mean periodic drive on `[0, 1]`, given by the Fourier series of its antiderivatives:
/// `F_j(τ) = Σ_k s_{jk} sin(2πkτ) + c_{jk}(cos(2πkτ) − 1)`, `k = 1, 2, …`.
///
/// Every such `F_j` vanishes at both endpoints, so `f_j = F_j'` has zero mean.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriveProfile {
    pub f1_sin: Vec<f64>,
    pub f1_cos: Vec<f64>,
    pub f0_sin: Vec<f64>,
    pub f0_cos: Vec<f64>,
}

fn series(sin: &[f64], cos: &[f64], tau: f64) -> f64 {
    let s: f64 = sin.iter().enumerate().map(|(k, c)| c * (2.0 * PI * (k + 1) as f64 * tau).sin()).sum();
    let c: f64 = cos.iter().enumerate().map(|(k, c)| c * ((2.0 * PI * (k + 1) as f64 * tau).cos() - 1.0)).sum();
    s + c
}

fn series_derivative(sin: &[f64], cos: &[f64], tau: f64) -> f64 {
    let s: f64 = sin
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let w = 2.0 * PI * (k + 1) as f64;
            c * w * (w * tau).cos()
        })
        .sum();
    let c: f64 = cos
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let w = 2.0 * PI * (k + 1) as f64;
            -c * w * (w * tau).sin()
        })
        .sum();
    s + c
}

impl DriveProfile {
    /// `F₁ = a sin 2πτ`, `F₀ = b sin 2πτ`.
    pub fn sinusoidal(a: f64, b: f64) -> Self {
        Self { f1_sin: vec![a], f1_cos: Vec::new(), f0_sin: vec![b], f0_cos: Vec::new() }
    }

    pub fn zero() -> Self {
        Self::sinusoidal(0.0, 0.0)
    }

    pub fn big_f1(&self, tau: f64) -> f64 {
        series(&self.f1_sin, &self.f1_cos, tau)
    }

    pub fn big_f0(&self, tau: f64) -> f64 {
        series(&self.f0_sin, &self.f0_cos, tau)
    }

    pub fn f1(&self, tau: f64) -> f64 {
        series_derivative(&self.f1_sin, &self.f1_cos, tau)
    }

    pub fn f0(&self, tau: f64) -> f64 {
        series_derivative(&self.f0_sin, &self.f0_cos, tau)
    }

    /// `F_j(1 − τ) = −F_j(τ)`, which holds exactly when no cosine terms are present.
    pub fn odd_about_half(&self) -> bool {
        self.f1_cos.iter().chain(&self.f0_cos).all(|&c| c == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.f1_sin.iter().chain(&self.f1_cos).chain(&self.f0_sin).chain(&self.f0_cos).all(|c| c.is_finite())
    }
}

/// `U₋₁(τ) = e^{−iF₀(τ)v}(cos F₁(τ) I − i sin F₁(τ) σ₁)` at a single value of `v`.
pub fn fast_unitary(drive: &DriveProfile, v_at_y: f64, tau: f64) -> ComplexMatrix {
    let f1 = drive.big_f1(tau);
    let phase = C64::from_polar(1.0, -drive.big_f0(tau) * v_at_y);
    let c = C64::new(f1.cos(), 0.0) * phase;
    let s = C64::new(0.0, -f1.sin()) * phase;
    ComplexMatrix::from_rows(&[&[c, s], &[s, c]])
}

/// Drive, confinement slope `v'(y)` and grid at fixed `ξ_x`.
#[derive(Clone, Debug, Serialize)]
pub struct AveragingModel {
    pub drive: DriveProfile,
    /// `v'(y)`; the two-interface continuation of this profile is used on the periodic grid.
    pub slope_profile: MassProfile,
    pub grid: RibbonGrid,
    pub xi_x: f64,
}

/// Largest Nyquist-band Fourier coefficient of `v'` allowed.
pub const NYQUIST_TOL: f64 = 1e-10;

impl AveragingModel {
    pub fn new(drive: DriveProfile, slope_profile: MassProfile, grid: RibbonGrid, xi_x: f64) -> Result<Self> {
        if !drive.is_finite() {
            return Err(Error::InvalidInput("drive coefficients must be finite".into()));
        }
        let model = Self { drive, slope_profile, grid, xi_x };
        let tail = model.nyquist_coefficient();
        if tail > NYQUIST_TOL {
            return Err(Error::InvalidInput(format!(
                "grid does not resolve v': Nyquist coefficient {tail:e} exceeds {NYQUIST_TOL:e}"
            )));
        }
        Ok(model)
    }

    pub fn slope_values(&self) -> Vec<f64> {
        self.grid.positions().into_iter().map(|y| self.slope_profile.periodized(y, self.grid.half_length)).collect()
    }

    fn slope_coefficients(&self) -> Vec<C64> {
        let n = self.grid.points;
        let values = self.slope_values();
        let h = self.grid.spacing();
        self.grid
            .wavenumbers()
            .into_iter()
            .map(|k| {
                values
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| C64::from_polar(v, -k * h * j as f64))
                    .sum::<C64>()
                    / n as f64
            })
            .collect()
    }

    /// Largest Fourier coefficient of `v'` in the top tenth of the wavenumber band.
    ///
    /// The Nyquist coefficient alone vanishes identically for odd profiles, so the neighbouring
    /// modes are included.
    pub fn nyquist_coefficient(&self) -> f64 {
        let k_max = PI * self.grid.points as f64 / (2.0 * self.grid.half_length);
        self.slope_coefficients()
            .iter()
            .zip(self.grid.wavenumbers())
            .filter(|(_, k)| k.abs() >= 0.9 * k_max)
            .map(|(c, _)| c.norm())
            .fold(0.0, f64::max)
    }

    /// `v(y)` as the zero-mean spectral antiderivative of `v'`.
    pub fn potential_values(&self) -> Vec<f64> {
        let coeffs = self.slope_coefficients();
        let ks = self.grid.wavenumbers();
        let h = self.grid.spacing();
        let n = self.grid.points;
        (0..n)
            .map(|j| {
                let y = h * j as f64;
                coeffs
                    .iter()
                    .zip(&ks)
                    .take(n - 1) // the Nyquist mode has no odd antiderivative on the grid
                    .filter(|(_, &k)| k != 0.0)
                    .map(|(c, &k)| (c / (I * k) * C64::from_polar(1.0, k * y)).re)
                    .sum()
            })
            .collect()
    }
}

/// `(2×2 coefficient) ⊗ (N×N operator)` with index `2j + s`.
fn spin_kron(spin: &ComplexMatrix, space: &ComplexMatrix) -> ComplexMatrix {
    let n = space.dim();
    ComplexMatrix::from_fn(2 * n, |r, c| spin[(r % 2, c % 2)] * space[(r / 2, c / 2)])
}

fn sigma_x_term(xi_x: f64, n: usize) -> ComplexMatrix {
    spin_kron(&pauli(1).scale(C64::new(xi_x, 0.0)), &ComplexMatrix::identity(n))
}

/// `H̃(τ) = (cos 2F₁ σ₂ − sin 2F₁ σ₃)(D_y − F₀v') + ξ_xσ₁` on the grid.
pub fn rotated_hamiltonian(model: &AveragingModel, tau: f64) -> Result<ComplexMatrix> {
    let derivative = model.grid.derivative_matrix();
    let h = rotated_with(model, tau, &derivative, &model.slope_values());
    h.ensure_hermitian()?;
    Ok(h)
}

fn rotated_with(model: &AveragingModel, tau: f64, derivative: &ComplexMatrix, slope: &[f64]) -> ComplexMatrix {
    let f1 = model.drive.big_f1(tau);
    let f0 = model.drive.big_f0(tau);
    let spin = crate::linalg::pauli_combination(0.0, (2.0 * f1).cos(), -(2.0 * f1).sin());
    let mut space = derivative.clone();
    for (j, v) in slope.iter().enumerate() {
        space[(j, j)] -= C64::new(f0 * v, 0.0);
    }
    &spin_kron(&spin, &space) + &sigma_x_term(model.xi_x, model.grid.points)
}

/// `‖U₋₁*(τ)(ξ_xσ₁ + D_yσ₂)U₋₁(τ)ψ − H̃(τ)ψ‖` for a grid state `ψ`.
///
/// Multiplication by `e^{−iF₀v}` aliases the highest grid modes, so the two operators agree
/// only on band-limited states; `ψ` should be smooth.
pub fn conjugation_defect(model: &AveragingModel, tau: f64, psi: &[C64]) -> Result<f64> {
    let n = model.grid.points;
    if psi.len() != 2 * n {
        return Err(Error::InvalidInput(format!("state has length {}, expected {}", psi.len(), 2 * n)));
    }
    let v = model.potential_values();
    let blocks: Vec<ComplexMatrix> = v.iter().map(|&vy| fast_unitary(&model.drive, vy, tau)).collect();
    let apply_blocks = |x: &[C64], adjoint: bool| -> Vec<C64> {
        let mut out = vec![ZERO; 2 * n];
        for (j, u) in blocks.iter().enumerate() {
            let u = if adjoint { u.adjoint() } else { u.clone() };
            out[2 * j] = u[(0, 0)] * x[2 * j] + u[(0, 1)] * x[2 * j + 1];
            out[2 * j + 1] = u[(1, 0)] * x[2 * j] + u[(1, 1)] * x[2 * j + 1];
        }
        out
    };
    let derivative = model.grid.derivative_matrix();
    let free = &spin_kron(&pauli(2), &derivative) + &sigma_x_term(model.xi_x, n);
    let conjugated = apply_blocks(&free.mul_vec(&apply_blocks(psi, false)), true);
    let rotated = rotated_with(model, tau, &derivative, &model.slope_values()).mul_vec(psi);
    let diff: Vec<f64> = conjugated.iter().zip(&rotated).map(|(a, b)| (a - b).norm_sqr()).collect();
    Ok(pairwise_sum(&diff).sqrt())
}

/// Period averages and the resulting effective coefficients.
#[derive(Clone, Debug, Serialize)]
pub struct EffectiveData {
    /// Pauli coefficients `(σ₁, σ₂, σ₃)` of `Y = b₁₁σ₂ − b₂₁σ₃`, the coefficient of `D_y`.
    pub y_pauli: [f64; 3],
    /// Pauli coefficients of `M = b₁₂σ₂ − b₂₂σ₃`, the coefficient of `v'(y)`.
    pub m_pauli: [f64; 3],
    pub h_y: f64,
    /// `⟨sin(2F₁)F₀⟩`, the σ₃ coefficient of `M`; the effective mass is this times `v'(y)`.
    pub mass_coefficient: f64,
    /// `[[⟨cos 2F₁⟩, −⟨cos 2F₁ F₀⟩], [⟨sin 2F₁⟩, −⟨sin 2F₁ F₀⟩]]`.
    pub b_avg: [[f64; 2]; 2],
    pub det_b: f64,
    /// Set when `det B` vanishes (to 1e−14).
    pub degenerate: bool,
}

impl EffectiveData {
    pub fn y_matrix(&self) -> ComplexMatrix {
        let [a, b, c] = self.y_pauli;
        crate::linalg::pauli_combination(a, b, c)
    }

    pub fn m_matrix(&self) -> ComplexMatrix {
        let [a, b, c] = self.m_pauli;
        crate::linalg::pauli_combination(a, b, c)
    }
}

/// Periodic trapezoid averages over `quad_points` nodes.
pub fn effective_data(drive: &DriveProfile, quad_points: usize) -> Result<EffectiveData> {
    if quad_points < 256 {
        return Err(Error::InvalidInput(format!("at least 256 quadrature points are needed, got {quad_points}")));
    }
    let nodes: Vec<f64> = (0..quad_points).map(|j| j as f64 / quad_points as f64).collect();
    let average = |g: &dyn Fn(f64) -> f64| -> f64 {
        let vals: Vec<f64> = nodes.iter().map(|&t| g(t)).collect();
        pairwise_sum(&vals) / quad_points as f64
    };
    let b11 = average(&|t| (2.0 * drive.big_f1(t)).cos());
    let b12 = -average(&|t| (2.0 * drive.big_f1(t)).cos() * drive.big_f0(t));
    let b21 = average(&|t| (2.0 * drive.big_f1(t)).sin());
    let b22 = -average(&|t| (2.0 * drive.big_f1(t)).sin() * drive.big_f0(t));
    let det_b = b11 * b22 - b12 * b21;
    Ok(EffectiveData {
        y_pauli: [0.0, b11, -b21],
        m_pauli: [0.0, b12, -b22],
        h_y: b11,
        mass_coefficient: -b22,
        b_avg: [[b11, b12], [b21, b22]],
        det_b,
        degenerate: det_b.abs() <= 1e-14,
    })
}

/// `ξ_xσ₁ + Y D_y + M v'(y)` on the grid.
pub fn averaged_hamiltonian(model: &AveragingModel, data: &EffectiveData) -> ComplexMatrix {
    let derivative = model.grid.derivative_matrix();
    averaged_with(model.xi_x, data, &derivative, &model.slope_values())
}

fn averaged_with(xi_x: f64, data: &EffectiveData, derivative: &ComplexMatrix, slope: &[f64]) -> ComplexMatrix {
    let potential = ComplexMatrix::from_fn(slope.len(), |a, b| if a == b { C64::new(slope[a], 0.0) } else { ZERO });
    let kinetic = &spin_kron(&data.y_matrix(), derivative) + &spin_kron(&data.m_matrix(), &potential);
    &kinetic + &sigma_x_term(xi_x, slope.len())
}

/// `2πσ_I = −sgn(det B)·sgn(s)` where `s` is the slope of `v'` at the interface.
pub fn effective_conductivity_sign(data: &EffectiveData, v_slope_at_0: f64) -> Result<i64> {
    if data.degenerate || data.det_b == 0.0 {
        return Err(Error::DegenerateDrive(format!("det B = {:e}", data.det_b)));
    }
    if v_slope_at_0 == 0.0 || !v_slope_at_0.is_finite() {
        return Err(Error::DegenerateDrive(format!("interface slope {v_slope_at_0}")));
    }
    Ok(-(data.det_b.signum() as i64) * (v_slope_at_0.signum() as i64))
}

/// Spectral flow of the averaged ribbon operator at interface 1 (`y = 0`).
pub fn ribbon_cross_check(drive: &DriveProfile, slope_profile: MassProfile, grid: RibbonGrid) -> Result<i64> {
    let data = effective_data(drive, 1024)?;
    let model = AveragingModel::new(drive.clone(), slope_profile, grid, 0.0)?;
    let derivative = grid.derivative_matrix();
    let slope = model.slope_values();
    // Asymptotic bulk: ξ_xσ₁ + ξ_y Y ± m₀M; its gap is set by the σ₃ mass when Y ∝ σ₂.
    let half_gap = (data.mass_coefficient * slope_profile.m0).abs();
    let opts = FlowOptions {
        xi_min: -0.6,
        xi_max: 0.6,
        initial_step: 0.05,
        e_win: 0.75 * half_gap,
        overlap_threshold: 0.7,
        max_depth: 12,
    };
    let report = spectral_flow_with(|x| averaged_with(x, &data, &derivative, &slope), &grid, &opts)?;
    Ok(report.at(1))
}

/// Gaussian packet on the grid with a fixed spinor.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GridPacket {
    pub center: f64,
    pub width: f64,
    pub spinor: [C64; 2],
}

impl GridPacket {
    pub fn values(&self, grid: &RibbonGrid) -> Vec<C64> {
        let mut psi: Vec<C64> = grid
            .positions()
            .into_iter()
            .flat_map(|y| {
                let g = (-0.5 * ((y - self.center) / self.width).powi(2)).exp();
                [self.spinor[0] * g, self.spinor[1] * g]
            })
            .collect();
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in psi.iter_mut() {
            *z /= norm;
        }
        psi
    }
}

/// Rotated-frame integration tolerance.
pub const AVERAGING_ODE_TOL: f64 = 1e-10;

/// `‖ψ_ε(t) − U₋₁(t/ε)ψ(t)‖` for each ε, with `ψ` evolved by the averaged operator.
///
/// Since `U₋₁` is unitary this equals the rotated-frame difference `‖ψ̃_ε(t) − ψ(t)‖`,
/// and `ψ̃_ε` solves `i∂_tψ̃ = H̃(t/ε)ψ̃`.
pub fn averaging_error(model: &AveragingModel, eps_sweep: &[f64], t_final: f64, packet: &GridPacket) -> Result<Vec<f64>> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidInput(format!("final time must be nonnegative, got {t_final}")));
    }
    if eps_sweep.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidInput("ε values must be positive".into()));
    }
    if t_final == 0.0 {
        return Ok(vec![0.0; eps_sweep.len()]);
    }
    let psi0 = packet.values(&model.grid);
    let derivative = model.grid.derivative_matrix();
    let slope = model.slope_values();
    let data = effective_data(&model.drive, 1024)?;
    let averaged = averaged_with(model.xi_x, &data, &derivative, &slope);
    let reference = unitary_exp(&averaged, t_final)?.mul_vec(&psi0);
    let n = model.grid.points;
    eps_sweep
        .par_iter()
        .map(|&eps| {
            let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
                let tau = t / eps;
                let f1 = model.drive.big_f1(tau);
                let f0 = model.drive.big_f0(tau);
                let (c, s) = ((2.0 * f1).cos(), (2.0 * f1).sin());
                // (D − F₀v') applied to each spin component.
                let mut up = vec![ZERO; n];
                let mut down = vec![ZERO; n];
                for j in 0..n {
                    let mut a = ZERO;
                    let mut b = ZERO;
                    for l in 0..n {
                        let d = derivative[(j, l)];
                        a += d * y[2 * l];
                        b += d * y[2 * l + 1];
                    }
                    up[j] = a - y[2 * j] * (f0 * slope[j]);
                    down[j] = b - y[2 * j + 1] * (f0 * slope[j]);
                }
                // (c σ₂ − s σ₃) acting on (up, down), plus ξ_x σ₁ on y.
                for j in 0..n {
                    let top = -I * c * down[j] - s * up[j] + y[2 * j + 1] * model.xi_x;
                    let bottom = I * c * up[j] + s * down[j] + y[2 * j] * model.xi_x;
                    dy[2 * j] = -I * top;
                    dy[2 * j + 1] = -I * bottom;
                }
            };
            let opts = OdeOptions { tol: AVERAGING_ODE_TOL, max_step: Some(0.1 * eps) };
            let psi = ode_propagate_state(rhs, &psi0, 0.0, t_final, opts)?;
            let diff: Vec<f64> = psi.iter().zip(&reference).map(|(a, b)| (a - b).norm_sqr()).collect();
            Ok(pairwise_sum(&diff).sqrt())
        })
        .collect()
}

/// Log-log slope of the averaging error against ε.
pub fn averaging_rate(eps_sweep: &[f64], errors: &[f64]) -> f64 {
    loglog_slope(eps_sweep, errors)
}
