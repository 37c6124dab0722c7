//! One function per subcommand; each writes its files and returns a one-line summary.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use sambe_core::averaging::{
    averaging_error, averaging_rate, effective_conductivity_sign, effective_data, ribbon_cross_check,
    AveragingModel, DriveProfile, GridPacket,
};
use sambe_core::evolution::{
    corrected_sweep, default_xi_set, long_time_check, truncation_sweep, EvolutionExperiment, LongTimeCheck,
};
use sambe_core::invariants::{bulk_difference, BulkHamiltonian, QuadratureSpec};
use sambe_core::linalg::{C64, ZERO};
use sambe_core::replica::{band_structure, BlochPoint, ReplicaModel};
use sambe_core::ribbon::{
    edge_spectrum, spectral_flow, FlowOptions, FlowReport, LocalPerturbation, MassProfile, ProfileShape,
    RibbonGrid, RibbonKind, RibbonModel,
};

use crate::config::{AverageConfig, EdgeConfig, InvariantConfig, RunConfig};
use crate::output::{Cell, OutputDir};
use crate::CliError;

fn linspace(range: [f64; 2], points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![range[0]];
    }
    (0..points).map(|i| range[0] + (range[1] - range[0]) * i as f64 / (points - 1) as f64).collect()
}

/// `bands.csv`: one row per momentum with all eigenvalues and `min|E|`.
pub fn cmd_bands(cfg: &RunConfig, out: &OutputDir) -> Result<String, CliError> {
    let c = &cfg.bands;
    if c.points1 == 0 || c.points2 == 0 {
        return Err(CliError::Config("bands.points1 and bands.points2 must be positive".into()));
    }
    let model = ReplicaModel::new(c.n, c.m, c.eps)?;
    let grid: Vec<BlochPoint> = linspace(c.xi2, c.points2)
        .into_iter()
        .flat_map(|x2| linspace(c.xi1, c.points1).into_iter().map(move |x1| [x1, x2]))
        .collect();
    let bands = band_structure(&model, &grid)?;
    let dim = model.dim();
    let mut header = vec!["xi1".to_string(), "xi2".to_string()];
    header.extend((1..=dim).map(|k| format!("E_{k}")));
    header.push("gap".into());
    let rows: Vec<Vec<Cell>> = bands
        .grid
        .iter()
        .zip(&bands.sheets)
        .zip(&bands.gap_at_zero)
        .map(|((xi, sheet), gap)| {
            let mut row: Vec<Cell> = vec![xi[0].into(), xi[1].into()];
            row.extend(sheet.iter().map(|&e| Cell::from(e)));
            row.push((*gap).into());
            row
        })
        .collect();
    let path = out.write_csv("bands.csv", &header, &rows)?;
    Ok(format!("{} momenta x {dim} bands -> {}", grid.len(), path.display()))
}

#[derive(Serialize)]
struct InvariantOutput {
    n: usize,
    eps: f64,
    m0: f64,
    model: &'static str,
    #[serde(rename = "W_plus")]
    w_plus: f64,
    #[serde(rename = "W_minus")]
    w_minus: f64,
    #[serde(rename = "W_diff")]
    w_diff: f64,
    expected: i64,
    rings: BTreeMap<usize, f64>,
    outer_contribution: f64,
    error_estimate: f64,
}

/// Bulk pair `(+m₀, −m₀)` for truncation `n`; `n = 0` uses the two-band model.
pub fn bulk_pair(n: usize, m0: f64, eps: f64) -> Result<(BulkHamiltonian, BulkHamiltonian), CliError> {
    let plus = ReplicaModel::new(n, m0, eps)?;
    let minus = plus.with_mass(-m0);
    Ok(if n == 0 {
        (BulkHamiltonian::Effective(plus), BulkHamiltonian::Effective(minus))
    } else {
        (BulkHamiltonian::Replica(plus), BulkHamiltonian::Replica(minus))
    })
}

pub fn quadrature_for(c: &InvariantConfig) -> QuadratureSpec {
    let base = QuadratureSpec::for_truncation(c.n);
    QuadratureSpec {
        r_max: c.r_max.unwrap_or(base.r_max),
        radial_order: c.radial_order,
        min_angles: c.min_angles,
        max_angles: c.max_angles,
        tol: c.tol,
    }
}

/// `1 − 2n(n+1)`.
pub fn expected_bulk_difference(n: usize) -> i64 {
    let n = n as i64;
    1 - 2 * n * (n + 1)
}

/// `invariant.json`.
pub fn cmd_invariant(cfg: &RunConfig, out: &OutputDir) -> Result<String, CliError> {
    let c = &cfg.invariant;
    let start = Instant::now();
    let (plus, minus) = bulk_pair(c.n, c.m0, c.eps)?;
    let report = bulk_difference(&plus, &minus, &quadrature_for(c))?;
    let result = InvariantOutput {
        n: c.n,
        eps: c.eps,
        m0: c.m0,
        model: if c.n == 0 { "effective" } else { "replica" },
        w_plus: report.w_plus,
        w_minus: report.w_minus,
        w_diff: report.w_diff,
        expected: expected_bulk_difference(c.n),
        rings: report.ring_contributions,
        outer_contribution: report.outer_contribution,
        error_estimate: report.quadrature_error_estimate,
    };
    let path = out.write_json("invariant.json", c, &result, start.elapsed())?;
    Ok(format!("W_diff = {:.6} (expected {}) -> {}", result.w_diff, result.expected, path.display()))
}

fn profile_shape(name: &str) -> Result<ProfileShape, CliError> {
    match name {
        "tanh" => Ok(ProfileShape::Tanh),
        "erf" => Ok(ProfileShape::Erf),
        other => Err(CliError::Config(format!("unknown mass profile `{other}` (expected tanh or erf)"))),
    }
}

/// Ribbon model described by an edge configuration.
pub fn ribbon_model(c: &EdgeConfig, seed: u64) -> Result<RibbonModel, CliError> {
    let kind = if c.n == 0 { RibbonKind::Effective } else { RibbonKind::Replica };
    let profile = MassProfile::new(profile_shape(&c.profile)?, c.m0, c.width)?;
    let grid = RibbonGrid::new(c.half_length, c.points)?;
    let mut model = RibbonModel::new(kind, c.n, c.eps, profile, grid)?;
    if let Some(p) = &c.perturbation {
        model = model.with_perturbation(LocalPerturbation {
            seed,
            amplitude: p.amplitude,
            center: p.center,
            radius: p.radius,
        });
    }
    Ok(model)
}

pub fn flow_options(c: &EdgeConfig, model: &RibbonModel) -> FlowOptions {
    let defaults = FlowOptions::for_model(model);
    FlowOptions {
        xi_min: c.xi_min.unwrap_or(defaults.xi_min),
        xi_max: c.xi_max.unwrap_or(defaults.xi_max),
        initial_step: c.step,
        e_win: c.e_win.unwrap_or(defaults.e_win),
        overlap_threshold: c.overlap_threshold,
        max_depth: c.max_depth,
    }
}

#[derive(Serialize)]
struct SigmaOutput {
    n: usize,
    eps: f64,
    sigma_interface_1: i64,
    sigma_interface_2: i64,
    sum: i64,
    /// `−W_diff = 2n(n+1) − 1` at interface 1.
    expected_interface_1: i64,
    e_win: f64,
    localization_radius: f64,
    #[serde(flatten)]
    flow: FlowReport,
}

/// `edge.csv` (fixed-grid in-gap spectrum) and `sigma.json` (spectral flow).
pub fn cmd_edge(cfg: &RunConfig, out: &OutputDir) -> Result<String, CliError> {
    let c = &cfg.edge;
    let start = Instant::now();
    let model = ribbon_model(c, cfg.seed)?;
    let opts = flow_options(c, &model);
    if !(c.spectrum_step > 0.0) {
        return Err(CliError::Config("edge.spectrum_step must be positive".into()));
    }
    let count = ((opts.xi_max - opts.xi_min) / c.spectrum_step).floor() as usize + 1;
    let xi_grid: Vec<f64> = (0..count).map(|i| opts.xi_min + c.spectrum_step * i as f64).collect();
    let spectrum = edge_spectrum(&model, &xi_grid, opts.e_win)?;
    let rows: Vec<Vec<Cell>> = spectrum
        .states
        .iter()
        .map(|s| {
            vec![
                s.xi_x.into(),
                s.energy.into(),
                Cell::Int(i64::from(s.interface)),
                s.weights[usize::from(s.interface) - 1].into(),
            ]
        })
        .collect();
    let header: Vec<String> = ["xi_x", "E", "interface_id", "localization"].map(String::from).to_vec();
    out.write_csv("edge.csv", &header, &rows)?;

    let flow = spectral_flow(&model, &opts)?;
    let result = SigmaOutput {
        n: c.n,
        eps: c.eps,
        sigma_interface_1: flow.at(1),
        sigma_interface_2: flow.at(2),
        sum: flow.at(1) + flow.at(2),
        expected_interface_1: -expected_bulk_difference(c.n),
        e_win: opts.e_win,
        localization_radius: spectrum.localization_radius,
        flow,
    };
    let path = out.write_json("sigma.json", &json!({ "seed": cfg.seed, "edge": c }), &result, start.elapsed())?;
    Ok(format!(
        "2πσ_I = {} (interface 1), {} (interface 2) -> {}",
        result.sigma_interface_1,
        result.sigma_interface_2,
        path.display()
    ))
}

#[derive(Serialize)]
struct TruncationSlope {
    n: usize,
    tau: f64,
    slope: f64,
    expected: f64,
    bound_violations: usize,
}

#[derive(Serialize)]
struct CorrectedSlopes {
    beta: f64,
    eps: Vec<f64>,
    corrected_errors: Vec<f64>,
    uncorrected_errors: Vec<f64>,
    corrected_slope: f64,
    uncorrected_slope: f64,
}

#[derive(Serialize)]
struct SlopesOutput {
    truncation: Vec<TruncationSlope>,
    corrected: CorrectedSlopes,
    long_time: LongTimeCheck,
}

/// `evolve_sweep.csv` and `slopes.json`.
pub fn cmd_evolve(cfg: &RunConfig, out: &OutputDir) -> Result<String, CliError> {
    let c = &cfg.evolve;
    let start = Instant::now();
    let base = ReplicaModel::new(0, c.m, c.eps_sweep.first().copied().unwrap_or(0.05))?;
    let mut rows = Vec::new();
    let mut truncation = Vec::new();
    for &n in &c.n_values {
        for &tau in &c.taus {
            let exp = EvolutionExperiment {
                model: base,
                xi_set: default_xi_set(),
                tau,
                eps_sweep: c.eps_sweep.clone(),
                n_trunc: n,
                oracle_tol: c.oracle_tol,
            };
            let r = truncation_sweep(&exp)?;
            for ((eps, err), bound) in r.eps.iter().zip(&r.errors).zip(&r.bounds) {
                rows.push(vec![Cell::from(*eps), Cell::from(n), Cell::from(tau), Cell::from(*err), Cell::from(*bound)]);
            }
            truncation.push(TruncationSlope {
                n,
                tau,
                slope: r.slope,
                expected: n as f64 + 1.0,
                bound_violations: r.violations.len(),
            });
        }
    }
    let header: Vec<String> = ["eps", "n", "tau", "error", "bound"].map(String::from).to_vec();
    out.write_csv("evolve_sweep.csv", &header, &rows)?;

    let corrected =
        corrected_sweep(&base, &c.corrected_eps_sweep, c.corrected_beta, c.corrected_c0, c.corrected_tau, c.oracle_tol, true)?;
    let plain =
        corrected_sweep(&base, &c.corrected_eps_sweep, c.corrected_beta, c.corrected_c0, c.corrected_tau, c.oracle_tol, false)?;
    let long_model = ReplicaModel::new(0, c.m, c.long_time_eps)?;
    let long_time = long_time_check(
        &long_model,
        &default_xi_set(),
        c.long_time_eps.powf(-1.5),
        c.long_time_n,
        c.oracle_tol.max(1e-11),
    )?;
    let result = SlopesOutput {
        truncation,
        corrected: CorrectedSlopes {
            beta: c.corrected_beta,
            eps: corrected.eps,
            corrected_errors: corrected.errors,
            uncorrected_errors: plain.errors,
            corrected_slope: corrected.slope,
            uncorrected_slope: plain.slope,
        },
        long_time,
    };
    let path = out.write_json("slopes.json", c, &result, start.elapsed())?;
    Ok(format!("{} sweep rows, corrected slope {:.3} -> {}", rows.len(), result.corrected.corrected_slope, path.display()))
}

/// `F₁ = a sin(2πhτ)`, `F₀ = b sin(2πhτ)`.
pub fn harmonic_drive(a: f64, b: f64, harmonic: usize) -> Result<DriveProfile, CliError> {
    if harmonic == 0 {
        return Err(CliError::Config("average.harmonic must be at least 1".into()));
    }
    let coeffs = |amp: f64| {
        let mut v = vec![0.0; harmonic];
        v[harmonic - 1] = amp;
        v
    };
    Ok(DriveProfile { f1_sin: coeffs(a), f1_cos: Vec::new(), f0_sin: coeffs(b), f0_cos: Vec::new() })
}

pub fn averaging_model(c: &AverageConfig) -> Result<AveragingModel, CliError> {
    let drive = harmonic_drive(c.a, c.b, c.harmonic)?;
    let profile = MassProfile::tanh(c.slope_amplitude, c.slope_width)?;
    let grid = RibbonGrid::new(c.half_length, c.points)?;
    Ok(AveragingModel::new(drive, profile, grid, c.xi_x)?)
}

pub fn averaging_packet(c: &AverageConfig) -> GridPacket {
    GridPacket { center: c.packet_center, width: c.packet_width, spinor: [C64::new(1.0, 0.0), ZERO] }
}

#[derive(Serialize)]
struct PauliCoefficients {
    sigma_1: f64,
    sigma_2: f64,
    sigma_3: f64,
}

impl From<[f64; 3]> for PauliCoefficients {
    fn from(c: [f64; 3]) -> Self {
        Self { sigma_1: c[0], sigma_2: c[1], sigma_3: c[2] }
    }
}

#[derive(Serialize)]
struct EffectiveOutput {
    #[serde(rename = "Y")]
    y: PauliCoefficients,
    #[serde(rename = "M")]
    m: PauliCoefficients,
    h_y: f64,
    mass_coefficient: f64,
    #[serde(rename = "B_avg")]
    b_avg: [[f64; 2]; 2],
    #[serde(rename = "det_B")]
    det_b: f64,
    degenerate: bool,
    /// Slope of `v'` at the interface `y = 0`.
    v_slope_at_0: f64,
    sigma_sign: Option<i64>,
    ribbon_sigma: Option<i64>,
    averaging_slope: f64,
}

/// `averaging.csv` and `effective.json`.
pub fn cmd_average(cfg: &RunConfig, out: &OutputDir) -> Result<String, CliError> {
    let c = &cfg.average;
    let start = Instant::now();
    let model = averaging_model(c)?;
    let data = effective_data(&model.drive, c.quad_points)?;
    let v_slope = c.slope_amplitude / c.slope_width;
    let sigma_sign = effective_conductivity_sign(&data, v_slope).ok();
    let errors = averaging_error(&model, &c.eps_sweep, c.t_final, &averaging_packet(c))?;
    let rows: Vec<Vec<Cell>> =
        c.eps_sweep.iter().zip(&errors).map(|(&e, &err)| vec![e.into(), c.t_final.into(), err.into()]).collect();
    let header: Vec<String> = ["eps", "t_final", "error"].map(String::from).to_vec();
    out.write_csv("averaging.csv", &header, &rows)?;
    let ribbon_sigma = if c.ribbon_check && !data.degenerate {
        Some(ribbon_cross_check(&model.drive, model.slope_profile, model.grid)?)
    } else {
        None
    };
    let slope = if c.eps_sweep.len() >= 2 { averaging_rate(&c.eps_sweep, &errors) } else { f64::NAN };
    let result = EffectiveOutput {
        y: data.y_pauli.into(),
        m: data.m_pauli.into(),
        h_y: data.h_y,
        mass_coefficient: data.mass_coefficient,
        b_avg: data.b_avg,
        det_b: data.det_b,
        degenerate: data.degenerate,
        v_slope_at_0: v_slope,
        sigma_sign,
        ribbon_sigma,
        averaging_slope: slope,
    };
    let path = out.write_json("effective.json", c, &result, start.elapsed())?;
    Ok(format!("h_y = {:.6}, det B = {:.6}, slope {:.3} -> {}", data.h_y, data.det_b, slope, path.display()))
}
