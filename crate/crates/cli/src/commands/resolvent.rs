//! `graphwave resolvent`: resolvent norms along the imaginary axis.

use std::path::PathBuf;

use anyhow::Result;
use graphwave::spectral::{
    default_band, resolvent_scan, Peak, ResolventMethod, ResolventScan, SlopeMethod,
    DEFAULT_SCAN_POINTS,
};
use graphwave::DiscreteSystem;
use serde::Serialize;

use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::{load, to_json, write_output, Outcome, DEFAULT_CELLS, EXIT_OK};

pub const SCAN_FILE: &str = "scan.csv";
pub const SCAN_SUMMARY_FILE: &str = "scan.json";

#[derive(Debug, Clone)]
pub struct ResolventOptions {
    pub spec: PathBuf,
    pub out: PathBuf,
    pub cells: usize,
    /// lower end of the band; `None` for a decade below the upper end
    pub beta_min: Option<f64>,
    /// upper end of the band; `None` for the resolved-band limit
    pub beta_max: Option<f64>,
    pub points: usize,
    pub method: ResolventMethod,
}

impl ResolventOptions {
    pub fn new(spec: PathBuf, out: PathBuf) -> Self {
        Self {
            spec,
            out,
            cells: DEFAULT_CELLS,
            beta_min: None,
            beta_max: None,
            points: DEFAULT_SCAN_POINTS,
            method: ResolventMethod::Auto,
        }
    }
}

/// Scan parameters after defaults are resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanParameters {
    pub cells: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub points: usize,
    pub method: ResolventMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary {
    pub band: [f64; 2],
    pub points: usize,
    /// method actually used
    pub method: ResolventMethod,
    pub fit_from: f64,
    pub slope: f64,
    pub raw_slope: f64,
    pub slope_method: SlopeMethod,
    pub max_norm: f64,
    pub peaks: Vec<Peak>,
}

pub fn summarize(scan: &ResolventScan) -> ScanSummary {
    ScanSummary {
        band: scan.band,
        points: scan.betas.len(),
        method: scan.method,
        fit_from: scan.fit_from,
        slope: scan.slope,
        raw_slope: scan.raw_slope,
        slope_method: scan.slope_method,
        max_norm: scan.norms.iter().copied().fold(0.0, f64::max),
        peaks: scan.peaks.clone(),
    }
}

pub fn resolve(opts: &ResolventOptions, sys: &DiscreteSystem) -> ScanParameters {
    let (lo, hi) = default_band(&sys.mesh);
    let beta_max = opts.beta_max.unwrap_or(hi);
    let beta_min = opts.beta_min.unwrap_or(if opts.beta_max.is_some() {
        beta_max * lo / hi
    } else {
        lo
    });
    ScanParameters {
        cells: opts.cells,
        beta_min,
        beta_max,
        points: opts.points,
        method: opts.method,
    }
}

pub fn scan_system(sys: &DiscreteSystem, p: &ScanParameters) -> Result<ResolventScan> {
    Ok(resolvent_scan(sys, p.beta_min, p.beta_max, p.points, p.method)?)
}

/// Writes `scan.csv`, `scan.json` and the manifest into `opts.out`.
pub fn cmd_resolvent(opts: &ResolventOptions) -> Result<Outcome> {
    let loaded = load(&opts.spec)?;
    let net = &loaded.network;
    let sys = net.discretize(&net.resolution(opts.cells))?;
    let params = resolve(opts, &sys);
    let scan = scan_system(&sys, &params)?;
    let summary = summarize(&scan);
    write_output(&opts.out, SCAN_FILE, &scan.to_csv())?;
    write_output(&opts.out, SCAN_SUMMARY_FILE, &to_json(&summary))?;
    RunManifest::new(
        "resolvent",
        &loaded.path,
        &loaded.spec,
        &params,
        &[SCAN_FILE, SCAN_SUMMARY_FILE, MANIFEST_FILE],
    )
    .write(&opts.out)?;
    Ok(Outcome {
        code: EXIT_OK,
        stdout: to_json(&summary),
    })
}
