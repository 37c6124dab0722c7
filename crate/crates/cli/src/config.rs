//! Run configuration: a TOML file with one table per command, plus `key=value` overrides.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory; the `SAMBE_OUTPUT_DIR` environment variable and `--out` take precedence.
    pub output_dir: Option<PathBuf>,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    /// Seed for every random choice (perturbations, property samples).
    pub seed: u64,
    pub bands: BandsConfig,
    pub invariant: InvariantConfig,
    pub edge: EdgeConfig,
    pub evolve: EvolveConfig,
    pub average: AverageConfig,
    pub accept: AcceptConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandsConfig {
    pub n: usize,
    pub m: f64,
    pub eps: f64,
    pub xi1: [f64; 2],
    pub xi2: [f64; 2],
    pub points1: usize,
    /// A single point gives a line cut at `xi2[0]`.
    pub points2: usize,
}

impl Default for BandsConfig {
    fn default() -> Self {
        Self { n: 2, m: 1.0, eps: 0.1, xi1: [-3.0, 3.0], xi2: [0.0, 0.0], points1: 601, points2: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvariantConfig {
    /// Truncation order; `n = 0` uses the effective two-band model.
    pub n: usize,
    pub m0: f64,
    pub eps: f64,
    /// Disk radius; defaults to `n + 39`.
    pub r_max: Option<f64>,
    pub radial_order: usize,
    pub min_angles: usize,
    pub max_angles: usize,
    pub tol: f64,
}

impl Default for InvariantConfig {
    fn default() -> Self {
        Self { n: 1, m0: 1.0, eps: 0.08, r_max: None, radial_order: 18, min_angles: 8, max_angles: 256, tol: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub amplitude: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "default_perturbation_radius")]
    pub radius: f64,
}

fn default_perturbation_radius() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeConfig {
    /// Truncation order; `n = 0` uses the effective two-band ribbon.
    pub n: usize,
    pub eps: f64,
    pub m0: f64,
    /// `tanh` or `erf`.
    pub profile: String,
    pub width: f64,
    pub half_length: f64,
    pub points: usize,
    pub xi_min: Option<f64>,
    pub xi_max: Option<f64>,
    pub step: f64,
    /// Energy window; defaults to three quarters of the bulk half-gap.
    pub e_win: Option<f64>,
    pub overlap_threshold: f64,
    pub max_depth: u32,
    /// Spacing of the fixed grid written to `edge.csv`.
    pub spectrum_step: f64,
    pub perturbation: Option<PerturbationConfig>,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self {
            n: 1,
            eps: 0.3,
            m0: 1.0,
            profile: "tanh".into(),
            width: 1.0,
            half_length: 60.0,
            points: 58,
            xi_min: None,
            xi_max: None,
            step: 0.05,
            e_win: None,
            overlap_threshold: 0.7,
            max_depth: 12,
            spectrum_step: 0.02,
            perturbation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub m: f64,
    pub n_values: Vec<usize>,
    pub eps_sweep: Vec<f64>,
    pub taus: Vec<f64>,
    pub oracle_tol: f64,
    pub corrected_beta: f64,
    pub corrected_c0: f64,
    pub corrected_tau: f64,
    pub corrected_eps_sweep: Vec<f64>,
    pub long_time_eps: f64,
    pub long_time_n: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            m: 1.0,
            n_values: vec![0, 1, 2, 3],
            eps_sweep: vec![0.025, 0.05, 0.1],
            taus: vec![0.5, PI, 2.0 * PI],
            oracle_tol: 1e-12,
            corrected_beta: 0.5,
            corrected_c0: 1.0,
            corrected_tau: PI,
            corrected_eps_sweep: vec![0.01, 0.02, 0.04, 0.08],
            long_time_eps: 0.05,
            long_time_n: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AverageConfig {
    /// `F₁ = a sin(2π h τ)`, `F₀ = b sin(2π h τ)` with `h = harmonic`.
    pub a: f64,
    pub b: f64,
    pub harmonic: usize,
    pub half_length: f64,
    pub points: usize,
    /// Plateau value of `v'`.
    pub slope_amplitude: f64,
    pub slope_width: f64,
    pub xi_x: f64,
    pub eps_sweep: Vec<f64>,
    pub t_final: f64,
    pub packet_center: f64,
    pub packet_width: f64,
    pub quad_points: usize,
    /// Also run the ribbon spectral flow of the averaged operator.
    pub ribbon_check: bool,
}

impl Default for AverageConfig {
    fn default() -> Self {
        Self {
            a: 0.5,
            b: 1.0,
            harmonic: 2,
            half_length: 24.0,
            points: 128,
            slope_amplitude: 1.0,
            slope_width: 2.0,
            xi_x: 0.3,
            eps_sweep: vec![0.02, 0.04, 0.08],
            t_final: 1.0,
            packet_center: 0.0,
            packet_width: 2.0,
            quad_points: 1024,
            ribbon_check: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptConfig {
    /// Adds the resolution-doubled `n = 1`, `ε = 0.15` ribbon (about ten minutes on one core).
    pub full: bool,
    /// Run only these criteria (1–9); empty means all.
    pub only: Vec<u8>,
}

/// Parses `key=value`; the value is read as a TOML literal, falling back to a bare string.
fn parse_override(raw: &str) -> Result<(Vec<String>, Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{raw}` is not of the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_owned).collect();
    if path.iter().any(String::is_empty) {
        return Err(CliError::Config(format!("override key `{key}` has an empty segment")));
    }
    let text = value.trim();
    let parsed = format!("v = {text}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_owned()));
    Ok((path, parsed))
}

fn apply_override(table: &mut Table, path: &[String], value: Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("override path is nonempty");
    let mut cursor = table;
    for segment in parents {
        let entry = cursor.entry(segment.clone()).or_insert_with(|| Value::Table(Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{segment}` is not a table in `{}`", path.join("."))))?;
    }
    cursor.insert(last.clone(), value);
    Ok(())
}

impl RunConfig {
    /// Reads the optional config file and applies the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for raw in overrides {
            let (path, value) = parse_override(raw)?;
            apply_override(&mut table, &path, value)?;
        }
        Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }
}
