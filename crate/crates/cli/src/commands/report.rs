//! `graphwave report`: predicted regime against measured decay and resolvent growth.

use std::path::PathBuf;

use anyhow::Result;
use graphwave::spectral::{
    classify_stability, eigenvalues, Classification, PeakCheck, ResolventMethod, SlopeMethod,
    Thresholds, DEFAULT_SCAN_POINTS,
};
use serde::Serialize;

use super::resolvent::{self, ResolventOptions, ScanParameters, SCAN_FILE};
use super::simulate::{self, FitResult, RunParameters, SimulateOptions, TRACE_FILE};
use super::spectrum::SPECTRUM_FILE;
use super::validate::{analyse, Prediction, Regime};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::{load, to_json, write_output, Outcome, DEFAULT_CELLS, EXIT_NEGATIVE, EXIT_OK};

pub const REPORT_FILE: &str = "report.json";

/// Smallest `r²` of the exponential fit that counts as exponential decay.
pub const EXPONENTIAL_MIN_R2: f64 = 0.98;

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub spec: PathBuf,
    pub out_dir: PathBuf,
    pub cells: usize,
    pub points: usize,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub method: ResolventMethod,
}

impl ReportOptions {
    pub fn new(spec: PathBuf, out_dir: PathBuf) -> Self {
        Self {
            spec,
            out_dir,
            cells: DEFAULT_CELLS,
            points: DEFAULT_SCAN_POINTS,
            dt: None,
            t_end: simulate::DEFAULT_T_END,
            method: ResolventMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Parameters {
    cells: usize,
    simulation: RunParameters,
    scan: ScanParameters,
    thresholds: Thresholds,
    exponential_min_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measured {
    pub classification: Classification,
    pub asymptotically_stable: bool,
    pub max_re: f64,
    pub resolvent_band: [f64; 2],
    pub slope_method: SlopeMethod,
    pub raw_slope: f64,
    pub peak_check: PeakCheck,
    pub exponential_fit: FitResult,
    pub power_fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub spec_path: String,
    pub predicted: Prediction,
    pub measured: Measured,
    /// `ω` of `E ≈ e^{-2ωt}` over the exponential window
    pub measured_decay_rate: Option<f64>,
    /// `p` of `E ≈ t^{-p}` over the power window
    pub measured_decay_exponent: Option<f64>,
    pub resolvent_slope: f64,
    pub agreement: bool,
    pub explanation: String,
}

/// Whether the measurements support the prediction. Without a prediction
/// (structural hypotheses or node condition fail) there is nothing to
/// contradict and the report agrees by definition.
fn agreement(regime: Regime, m: &Measured) -> (bool, String) {
    match regime {
        Regime::Exponential => {
            let r2 = m.exponential_fit.fit().map(|f| f.r2);
            let ok = m.classification == Classification::ExponentialConsistent
                && r2.is_some_and(|r| r >= EXPONENTIAL_MIN_R2);
            (
                ok,
                format!(
                    "exponential predicted; classification {:?}, exponential fit r2 {:?} (need >= {EXPONENTIAL_MIN_R2})",
                    m.classification, r2
                ),
            )
        }
        Regime::Polynomial => (
            matches!(m.classification, Classification::PolynomialConsistent { .. }),
            format!("polynomial t^-2 predicted; classification {:?}", m.classification),
        ),
        Regime::Undetermined => (
            true,
            "node condition fails: no regime predicted, nothing to contradict".into(),
        ),
        Regime::None => (
            true,
            format!(
                "structural hypotheses fail: no stability claim; measured {}",
                if m.asymptotically_stable {
                    "asymptotically stable"
                } else {
                    "not asymptotically stable"
                }
            ),
        ),
    }
}

/// Writes `report.json`, `trace.csv`, `spectrum.csv`, `scan.csv` and the
/// manifest into `opts.out_dir`; exit 1 when measurement and prediction disagree.
pub fn cmd_report(opts: &ReportOptions) -> Result<Outcome> {
    let loaded = load(&opts.spec)?;
    let net = &loaded.network;
    let (predicted, ..) = analyse(net);
    let sys = net.discretize(&net.resolution(opts.cells))?;

    let mut sim_opts = SimulateOptions::new(opts.spec.clone(), opts.out_dir.clone());
    sim_opts.cells = opts.cells;
    sim_opts.dt = opts.dt;
    sim_opts.t_end = opts.t_end;
    let sim_params = simulate::resolve(&sim_opts, &sys);

    let mut scan_opts = ResolventOptions::new(opts.spec.clone(), opts.out_dir.clone());
    scan_opts.cells = opts.cells;
    scan_opts.points = opts.points;
    scan_opts.method = opts.method;
    let scan_params = resolvent::resolve(&scan_opts, &sys);

    let (spectrum, (scan, sim)) = rayon::join(
        || eigenvalues(&sys),
        || {
            rayon::join(
                || resolvent::scan_system(&sys, &scan_params),
                || simulate::simulate_system(&sys, &sim_params),
            )
        },
    );
    let spectrum = spectrum?;
    let scan = scan?;
    let (trace, summary) = sim?;

    let thresholds = Thresholds::from(net.tolerances.clone());
    let verdict = classify_stability(&spectrum, &scan, &thresholds);
    let measured = Measured {
        classification: verdict.classification,
        asymptotically_stable: verdict.asymptotically_stable,
        max_re: verdict.max_re,
        resolvent_band: scan.band,
        slope_method: verdict.slope_method,
        raw_slope: scan.raw_slope,
        peak_check: verdict.peak_check,
        exponential_fit: summary.exponential,
        power_fit: summary.power,
    };
    let (agree, explanation) = agreement(predicted.regime, &measured);
    let report = Report {
        spec_path: loaded.path.clone(),
        measured_decay_rate: measured.exponential_fit.fit().map(|f| f.rate),
        measured_decay_exponent: measured.power_fit.fit().map(|f| f.rate),
        resolvent_slope: verdict.slope,
        predicted,
        measured,
        agreement: agree,
        explanation,
    };

    let dir = &opts.out_dir;
    write_output(dir, REPORT_FILE, &to_json(&report))?;
    write_output(dir, TRACE_FILE, &trace.to_csv())?;
    write_output(dir, SPECTRUM_FILE, &spectrum.to_csv())?;
    write_output(dir, SCAN_FILE, &scan.to_csv())?;
    let params = Parameters {
        cells: opts.cells,
        simulation: sim_params,
        scan: scan_params,
        thresholds,
        exponential_min_r2: EXPONENTIAL_MIN_R2,
    };
    RunManifest::new(
        "report",
        &loaded.path,
        &loaded.spec,
        &params,
        &[REPORT_FILE, TRACE_FILE, SPECTRUM_FILE, SCAN_FILE, MANIFEST_FILE],
    )
    .write(dir)?;
    Ok(Outcome {
        code: if report.agreement { EXIT_OK } else { EXIT_NEGATIVE },
        stdout: to_json(&report),
    })
}
