//! The nine acceptance criteria, each reduced to measured values, pinned tolerances and a verdict.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use sambe_core::averaging::{
    averaging_error, averaging_rate, conjugation_defect, effective_conductivity_sign, effective_data,
    ribbon_cross_check, DriveProfile, GridPacket,
};
use sambe_core::evolution::{
    corrected_sweep, default_xi_set, exact_propagator, long_time_check, truncated_propagator, truncation_sweep,
    EvolutionExperiment,
};
use sambe_core::invariants::{bulk_difference, QuadratureSpec};
use sambe_core::linalg::{eigvals_hermitian, C64};
use sambe_core::numeric::loglog_slope;
use sambe_core::replica::{bloch_hamiltonian, ring_gap, ReplicaModel};
use sambe_core::ribbon::{
    spectral_flow, FlowOptions, LocalPerturbation, MassProfile, RibbonGrid, RibbonKind, RibbonModel,
};

use crate::commands::{averaging_model, averaging_packet, bulk_pair, expected_bulk_difference, harmonic_drive};
use crate::config::{AverageConfig, RunConfig};
use crate::output::OutputDir;
use crate::CliError;

/// Largest allowed `|W_diff − (1 − 2n(n+1))|`.
pub const INVARIANT_TOL: f64 = 0.05;
/// Largest allowed deviation of a ring contribution from `1` (centre) or `−4ℓ`.
pub const RING_TOL: f64 = 0.1;
pub const INVARIANT_EPS: f64 = 0.08;

pub const GAP_SLOPE_TOL: f64 = 0.2;
pub const GAP_EPS_SWEEP: [f64; 3] = [0.05, 0.1, 0.2];
/// Relative tolerance on the central gap `2ε²|m|` at ε = 0.1.
pub const CENTRAL_GAP_REL_TOL: f64 = 0.10;

pub const DUHAMEL_SLOPE_TOL: f64 = 0.1;
pub const DUHAMEL_EPS_SWEEP: [f64; 3] = [0.025, 0.05, 0.1];
pub const DUHAMEL_TAUS: [f64; 3] = [0.5, PI, 2.0 * PI];
pub const DUHAMEL_MAX_N: usize = 3;
pub const ORACLE_TOL: f64 = 1e-12;

pub const LONG_TIME_EPS: f64 = 0.05;

pub const CORRECTED_BETA: f64 = 0.5;
/// Corrected slope must reach `1 + β − CORRECTED_MARGIN`.
pub const CORRECTED_MARGIN: f64 = 0.1;
/// Uncorrected slope must lie within this distance of 1.
pub const UNCORRECTED_TOL: f64 = 0.1;
pub const CORRECTED_EPS_SWEEP: [f64; 4] = [0.01, 0.02, 0.04, 0.08];

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const SYMMETRY_SAMPLES: usize = 200;

pub const ODDNESS_TOL: f64 = 1e-12;
pub const AVERAGING_SLOPE_TOL: f64 = 0.15;
pub const CONJUGATION_TOL: f64 = 1e-8;
pub const CONJUGATION_SAMPLES: usize = 20;

pub const ORACLE_AGREEMENT_TOL: f64 = 1e-6;
pub const ORACLE_REPLICAS: usize = 5;

pub const CRITERIA: [(u8, &str); 9] = [
    (1, "invariant quantization"),
    (2, "gap scaling"),
    (3, "Duhamel bounds"),
    (4, "long-time periodized evolution"),
    (5, "effective 2x2 with corrector"),
    (6, "bulk-interface correspondence"),
    (7, "spectral symmetry"),
    (8, "averaging theory"),
    (9, "oracle cross-agreement"),
];

#[derive(Clone, Copy, Debug, Default)]
pub struct AcceptOptions {
    pub seed: u64,
    /// Includes the resolution-doubled `n = 1`, `ε = 0.15` ribbon.
    pub full: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub summary: String,
    pub measured: Value,
    pub tolerances: Value,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("criterion {} [{verdict}] {}: {}", self.id, self.title, self.summary)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AcceptanceReport {
    pub criteria: Vec<CriterionOutcome>,
    pub passed: usize,
    pub failed: usize,
    pub all_passed: bool,
}

struct Verdict {
    passed: bool,
    summary: String,
    measured: Value,
    tolerances: Value,
}

type Check = Result<Verdict, sambe_core::Error>;

pub fn run_criterion(id: u8, opts: &AcceptOptions) -> CriterionOutcome {
    let start = Instant::now();
    let title = CRITERIA.iter().find(|(i, _)| *i == id).map(|(_, t)| t.to_string()).unwrap_or_default();
    let verdict = match id {
        1 => invariant_quantization(),
        2 => gap_scaling(),
        3 => duhamel_bounds(),
        4 => long_time(),
        5 => corrected_effective(),
        6 => bulk_interface(opts),
        7 => spectral_symmetry(opts.seed),
        8 => averaging(opts.seed),
        9 => oracle_agreement(),
        _ => Err(sambe_core::Error::InvalidInput(format!("no criterion {id}"))),
    };
    let verdict = verdict.unwrap_or_else(|e| Verdict {
        passed: false,
        summary: format!("error: {e}"),
        measured: Value::Null,
        tolerances: Value::Null,
    });
    CriterionOutcome {
        id,
        title,
        passed: verdict.passed,
        summary: verdict.summary,
        measured: verdict.measured,
        tolerances: verdict.tolerances,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs the listed criteria (all when `only` is empty), in order.
pub fn run(opts: &AcceptOptions, only: &[u8]) -> AcceptanceReport {
    let criteria: Vec<CriterionOutcome> = CRITERIA
        .iter()
        .filter(|(id, _)| only.is_empty() || only.contains(id))
        .map(|(id, _)| run_criterion(*id, opts))
        .collect();
    let passed = criteria.iter().filter(|c| c.passed).count();
    let failed = criteria.len() - passed;
    AcceptanceReport { criteria, passed, failed, all_passed: failed == 0 }
}

/// Writes `acceptance_report.json`; any failed criterion turns into [`CliError::Acceptance`].
pub fn cmd_accept(cfg: &RunConfig, out: &OutputDir) -> Result<String, CliError> {
    let start = Instant::now();
    let opts = AcceptOptions { seed: cfg.seed, full: cfg.accept.full };
    let report = run(&opts, &cfg.accept.only);
    for c in &report.criteria {
        println!("{}", c.line());
    }
    let echo = json!({ "seed": cfg.seed, "accept": cfg.accept });
    let path = out.write_json("acceptance_report.json", &echo, &report, start.elapsed())?;
    let summary = format!("{} passed, {} failed -> {}", report.passed, report.failed, path.display());
    if report.all_passed {
        Ok(summary)
    } else {
        Err(CliError::Acceptance(summary))
    }
}

fn invariant_quantization() -> Check {
    let mut passed = true;
    let mut measured = Vec::new();
    let mut parts = Vec::new();
    for n in 0..=2 {
        let (plus, minus) = bulk_pair(n, 1.0, INVARIANT_EPS).map_err(into_core)?;
        let report = bulk_difference(&plus, &minus, &QuadratureSpec::for_truncation(n))?;
        let expected = expected_bulk_difference(n) as f64;
        let mut ok = (report.w_diff - expected).abs() <= INVARIANT_TOL;
        for (&ell, &omega) in &report.ring_contributions {
            let target = if ell == 0 { 1.0 } else { -4.0 * ell as f64 };
            ok &= (omega - target).abs() <= RING_TOL;
        }
        passed &= ok;
        let rings: Vec<String> = report.ring_contributions.values().map(|w| format!("{w:.3}")).collect();
        parts.push(format!("n={n} W_d={:.4} rings [{}]", report.w_diff, rings.join(", ")));
        measured.push(json!({
            "n": n,
            "W_diff": report.w_diff,
            "expected": expected,
            "rings": report.ring_contributions,
            "error_estimate": report.quadrature_error_estimate,
        }));
    }
    Ok(Verdict {
        passed,
        summary: parts.join("; "),
        measured: Value::Array(measured),
        tolerances: json!({ "W_diff": INVARIANT_TOL, "rings": RING_TOL, "eps": INVARIANT_EPS }),
    })
}

fn into_core(e: CliError) -> sambe_core::Error {
    match e {
        CliError::Core(e) => e,
        other => sambe_core::Error::InvalidInput(other.to_string()),
    }
}

fn gap_scaling() -> Check {
    let mut passed = true;
    let mut measured = Vec::new();
    let mut parts = Vec::new();
    for ell in [1usize, 2] {
        let gaps = GAP_EPS_SWEEP
            .iter()
            .map(|&e| Ok(ring_gap(&ReplicaModel::new(ell, 1.0, e)?, ell)?.gap))
            .collect::<Result<Vec<f64>, sambe_core::Error>>()?;
        let slope = loglog_slope(&GAP_EPS_SWEEP, &gaps);
        passed &= (slope - 2.0 * ell as f64).abs() <= GAP_SLOPE_TOL;
        parts.push(format!("ring {ell} slope {slope:.3}"));
        measured.push(json!({ "ring": ell, "gaps": gaps, "slope": slope, "expected": 2 * ell }));
    }
    let eps = 0.1;
    let central = ring_gap(&ReplicaModel::new(1, 1.0, eps)?, 0)?.gap;
    let predicted = 2.0 * eps * eps;
    let rel = (central / predicted - 1.0).abs();
    passed &= rel <= CENTRAL_GAP_REL_TOL;
    parts.push(format!("central gap {central:.5} vs {predicted:.3}"));
    measured.push(json!({ "central_gap": central, "predicted": predicted, "relative_deviation": rel }));
    Ok(Verdict {
        passed,
        summary: parts.join(", "),
        measured: Value::Array(measured),
        tolerances: json!({ "slope": GAP_SLOPE_TOL, "central_relative": CENTRAL_GAP_REL_TOL, "eps": GAP_EPS_SWEEP }),
    })
}

fn duhamel_bounds() -> Check {
    let base = ReplicaModel::new(0, 1.0, DUHAMEL_EPS_SWEEP[0])?;
    let mut passed = true;
    let mut measured = Vec::new();
    let mut worst_slope: f64 = 0.0;
    let mut violations = 0;
    for n in 0..=DUHAMEL_MAX_N {
        for tau in DUHAMEL_TAUS {
            let exp = EvolutionExperiment {
                model: base,
                xi_set: default_xi_set(),
                tau,
                eps_sweep: DUHAMEL_EPS_SWEEP.to_vec(),
                n_trunc: n,
                oracle_tol: ORACLE_TOL,
            };
            let r = truncation_sweep(&exp)?;
            let deviation = (r.slope - (n as f64 + 1.0)).abs();
            worst_slope = worst_slope.max(deviation);
            violations += r.violations.len();
            passed &= deviation <= DUHAMEL_SLOPE_TOL && r.violations.is_empty();
            measured.push(json!({ "n": n, "tau": tau, "slope": r.slope, "errors": r.errors, "bounds": r.bounds,
                                  "violations": r.violations.len() }));
        }
    }
    Ok(Verdict {
        passed,
        summary: format!(
            "{} sweeps, {violations} bound violations, largest slope deviation {worst_slope:.3}",
            measured.len()
        ),
        measured: Value::Array(measured),
        tolerances: json!({ "slope": DUHAMEL_SLOPE_TOL, "eps": DUHAMEL_EPS_SWEEP, "tau": DUHAMEL_TAUS,
                            "bloch_points": default_xi_set().len() }),
    })
}

fn long_time() -> Check {
    let eps = LONG_TIME_EPS;
    let tau = eps.powf(-1.5);
    let check = long_time_check(&ReplicaModel::new(0, 1.0, eps)?, &default_xi_set(), tau, 1, 1e-11)?;
    let c = check.reference_constant;
    let small = eps * eps;
    let envelope = c * (tau + 1.0) * small * (c * tau * small).exp();
    Ok(Verdict {
        passed: check.max_error <= envelope,
        summary: format!(
            "max error {:.3e} at tau {:.1}, envelope {:.3e} (c_1 = {:.2}, fitted {:.3})",
            check.max_error, tau, envelope, c, check.fitted_constant
        ),
        measured: json!({ "check": check, "envelope": envelope }),
        tolerances: json!({ "eps": eps, "n_trunc": 1 }),
    })
}

fn corrected_effective() -> Check {
    let model = ReplicaModel::new(0, 1.0, 0.05)?;
    let with = corrected_sweep(&model, &CORRECTED_EPS_SWEEP, CORRECTED_BETA, 1.0, PI, ORACLE_TOL, true)?;
    let without = corrected_sweep(&model, &CORRECTED_EPS_SWEEP, CORRECTED_BETA, 1.0, PI, ORACLE_TOL, false)?;
    let target = 1.0 + CORRECTED_BETA - CORRECTED_MARGIN;
    Ok(Verdict {
        passed: with.slope >= target && (without.slope - 1.0).abs() <= UNCORRECTED_TOL,
        summary: format!("corrected slope {:.3} (>= {target:.2}), uncorrected {:.3}", with.slope, without.slope),
        measured: json!({ "corrected": with, "uncorrected": without }),
        tolerances: json!({ "beta": CORRECTED_BETA, "corrected_min": target, "uncorrected": UNCORRECTED_TOL }),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
struct RibbonCase {
    label: &'static str,
    n: usize,
    eps: f64,
    half_length: f64,
    points: usize,
    width: f64,
    perturbed: bool,
}

fn ribbon_cases(full: bool) -> Vec<RibbonCase> {
    // Grids per (n, ε): the decay length 1/(ε²m₀) sets the half-length.
    let bases = [(0, 0.3, 60.0, 64), (1, 0.3, 60.0, 58), (0, 0.15, 150.0, 64), (1, 0.15, 100.0, 96)];
    let mut cases = Vec::new();
    for (n, eps, half_length, points) in bases {
        let base = RibbonCase { label: "base", n, eps, half_length, points, width: 1.0, perturbed: false };
        cases.push(base);
        cases.push(RibbonCase { label: "width x2", width: 2.0, ..base });
        if n == 0 || eps == 0.3 || full {
            cases.push(RibbonCase { label: "resolution x2", points: 2 * points, ..base });
        }
        cases.push(RibbonCase { label: "perturbed", perturbed: true, ..base });
    }
    cases
}

fn bulk_interface(opts: &AcceptOptions) -> Check {
    let mut passed = true;
    let mut measured = Vec::new();
    let mut failures = Vec::new();
    let cases = ribbon_cases(opts.full);
    for case in &cases {
        let kind = if case.n == 0 { RibbonKind::Effective } else { RibbonKind::Replica };
        let profile = MassProfile::tanh(1.0, case.width)?;
        let grid = RibbonGrid::new(case.half_length, case.points)?;
        let mut model = RibbonModel::new(kind, case.n, case.eps, profile, grid)?;
        if case.perturbed {
            model = model.with_perturbation(LocalPerturbation {
                seed: opts.seed,
                amplitude: case.eps * case.eps / 4.0,
                center: 0.0,
                radius: 3.0,
            });
        }
        let expected = -expected_bulk_difference(case.n);
        let outcome = spectral_flow(&model, &FlowOptions::for_model(&model));
        let (ok, value) = match &outcome {
            Ok(r) => (r.at(1) == expected && r.at(2) == -expected, json!(r.conductivity)),
            Err(e) => (false, json!(e.to_string())),
        };
        if !ok {
            failures.push(format!("n={} eps={} {}: {value}", case.n, case.eps, case.label));
        }
        passed &= ok;
        measured.push(json!({ "case": case, "expected_interface_1": expected, "conductivity": value }));
    }
    let summary = if failures.is_empty() {
        format!("{} ribbons: interface 1 gives -1 (n=0) and +3 (n=1), interface 2 the opposite, in every case", cases.len())
    } else {
        format!("mismatches: {}", failures.join("; "))
    };
    Ok(Verdict {
        passed,
        summary,
        measured: Value::Array(measured),
        tolerances: json!({ "exact_integer": true, "perturbation_amplitude": "eps^2/4", "full": opts.full }),
    })
}

fn spectral_symmetry(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0007);
    let samples: Vec<(usize, f64, f64, [f64; 2])> = (0..SYMMETRY_SAMPLES)
        .map(|_| {
            (
                rng.gen_range(0..=3),
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(0.01..=0.5),
                [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
            )
        })
        .collect();
    let defects = samples
        .par_iter()
        .map(|&(n, m, eps, xi)| {
            let e = eigvals_hermitian(&bloch_hamiltonian(&ReplicaModel::new(n, m, eps)?, xi))?;
            Ok(e.iter().zip(e.iter().rev()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>, sambe_core::Error>>()?;
    let worst = defects.iter().copied().fold(0.0, f64::max);
    Ok(Verdict {
        passed: worst <= SYMMETRY_TOL,
        summary: format!("{} samples, max |E_k + E_(D+1-k)| = {worst:.2e}", samples.len()),
        measured: json!({ "samples": samples.len(), "max_defect": worst }),
        tolerances: json!({ "symmetry": SYMMETRY_TOL }),
    })
}

fn averaging(seed: u64) -> Check {
    let odd = effective_data(&DriveProfile::sinusoidal(0.5, 1.0), 1024)?;
    let oddness = odd.b_avg[0][1].abs().max(odd.b_avg[1][0].abs());

    let cfg = AverageConfig::default();
    let eps = cfg.eps_sweep.clone();
    let model = averaging_model(&cfg).map_err(into_core)?;
    let errors = averaging_error(&model, &eps, 1.0, &averaging_packet(&cfg))?;
    let slope = averaging_rate(&eps, &errors);
    // Diagnostic only: with the fundamental drive, t/ε = 12.5 at ε = 0.08 sits on a half period.
    let fundamental = AverageConfig { harmonic: 1, ..cfg.clone() };
    let fundamental_model = averaging_model(&fundamental).map_err(into_core)?;
    let fundamental_errors = averaging_error(&fundamental_model, &eps, 1.0, &averaging_packet(&fundamental))?;
    let fundamental_slope = averaging_rate(&eps, &fundamental_errors);

    let conj_model = averaging_model(&fundamental).map_err(into_core)?;
    let packets: Vec<Vec<C64>> = [(-3.0, [1.0, 0.0]), (0.0, [0.6, 0.8]), (5.0, [0.0, 1.0])]
        .iter()
        .map(|&(c, s)| {
            GridPacket { center: c, width: 2.5, spinor: [C64::new(s[0], 0.0), C64::new(0.0, s[1])] }
                .values(&conj_model.grid)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0008);
    let taus: Vec<f64> = (0..CONJUGATION_SAMPLES).map(|_| rng.gen()).collect();
    let mut conjugation: f64 = 0.0;
    for &tau in &taus {
        for psi in &packets {
            conjugation = conjugation.max(conjugation_defect(&conj_model, tau, psi)?);
        }
    }

    let mut signs = Vec::new();
    let mut signs_agree = true;
    for b in [1.0, -1.0] {
        let drive = harmonic_drive(0.5, b, 1).map_err(into_core)?;
        let data = effective_data(&drive, 1024)?;
        let formula = effective_conductivity_sign(&data, cfg.slope_amplitude / cfg.slope_width)?;
        let flow = ribbon_cross_check(&drive, conj_model.slope_profile, conj_model.grid)?;
        signs_agree &= formula == flow;
        signs.push(json!({ "b": b, "det_B": data.det_b, "formula": formula, "ribbon": flow }));
    }

    let passed = oddness <= ODDNESS_TOL
        && (slope - 1.0).abs() <= AVERAGING_SLOPE_TOL
        && conjugation <= CONJUGATION_TOL
        && signs_agree;
    Ok(Verdict {
        passed,
        summary: format!(
            "oddness {oddness:.1e}, slope {slope:.3} (fundamental drive {fundamental_slope:.3}), \
             conjugation {conjugation:.1e}, sign formula {} ribbon",
            if signs_agree { "matches" } else { "disagrees with" }
        ),
        measured: json!({
            "oddness": oddness,
            "eps": eps,
            "errors": errors,
            "slope": slope,
            "fundamental_errors": fundamental_errors,
            "fundamental_slope": fundamental_slope,
            "conjugation_defect": conjugation,
            "signs": signs,
        }),
        tolerances: json!({ "oddness": ODDNESS_TOL, "slope": AVERAGING_SLOPE_TOL, "conjugation": CONJUGATION_TOL,
                            "harmonic": cfg.harmonic }),
    })
}

fn oracle_agreement() -> Check {
    let tau = 2.0 * PI;
    let mut worst: f64 = 0.0;
    for m in [1.0, -1.0] {
        let model = ReplicaModel::new(0, m, 0.05)?;
        let diffs = default_xi_set()
            .par_iter()
            .map(|&xi| {
                let ode = exact_propagator(&model, xi, tau, ORACLE_TOL)?;
                let replica = truncated_propagator(&model, xi, tau, ORACLE_REPLICAS)?;
                Ok((&ode - &replica).op_norm())
            })
            .collect::<Result<Vec<f64>, sambe_core::Error>>()?;
        worst = diffs.into_iter().fold(worst, f64::max);
    }
    Ok(Verdict {
        passed: worst <= ORACLE_AGREEMENT_TOL,
        summary: format!("max ||U_ode - U_11|| = {worst:.2e} over {} momenta, m = +-1", default_xi_set().len()),
        measured: json!({ "max_difference": worst }),
        tolerances: json!({ "agreement": ORACLE_AGREEMENT_TOL, "replicas": 2 * ORACLE_REPLICAS + 1 }),
    })
}
