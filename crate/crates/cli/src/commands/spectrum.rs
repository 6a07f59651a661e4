//! `graphwave spectrum`: all eigenvalues of the discrete generator.

use std::path::PathBuf;

use anyhow::Result;
use graphwave::spectral::{eigenvalues, SpectrumResult, STABILITY_MARGIN};
use serde::Serialize;

use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::{load, to_json, write_output, Outcome, DEFAULT_CELLS, EXIT_OK};

pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const SPECTRUM_SUMMARY_FILE: &str = "spectrum.json";

#[derive(Debug, Clone)]
pub struct SpectrumOptions {
    pub spec: PathBuf,
    pub out: PathBuf,
    pub cells: usize,
}

impl SpectrumOptions {
    pub fn new(spec: PathBuf, out: PathBuf) -> Self {
        Self {
            spec,
            out,
            cells: DEFAULT_CELLS,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Parameters {
    cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub dofs: usize,
    pub eigenvalues: usize,
    pub method: String,
    pub max_re: f64,
    pub spectral_gap: f64,
    pub asymptotically_stable: bool,
    pub max_residual: f64,
    pub certified: bool,
    pub conjugate_symmetric: bool,
    /// the lowest few eigenvalues with `Im λ > 0`, as `[re, im]`
    pub lowest: Vec<[f64; 2]>,
}

pub fn summarize(spec: &SpectrumResult) -> SpectrumSummary {
    SpectrumSummary {
        dofs: spec.n,
        eigenvalues: spec.eigenvalues.len(),
        method: spec.method.clone(),
        max_re: spec.max_re(),
        spectral_gap: spec.spectral_gap(),
        asymptotically_stable: spec.max_re() < -STABILITY_MARGIN,
        max_residual: spec.max_residual(),
        certified: spec.is_certified(),
        conjugate_symmetric: spec.is_conjugate_symmetric(1e-8),
        lowest: spec.upper_half().iter().take(10).map(|e| [e.re, e.im]).collect(),
    }
}

/// Writes `spectrum.csv`, `spectrum.json` and the manifest into `opts.out`.
pub fn cmd_spectrum(opts: &SpectrumOptions) -> Result<Outcome> {
    let loaded = load(&opts.spec)?;
    let net = &loaded.network;
    let sys = net.discretize(&net.resolution(opts.cells))?;
    let spec = eigenvalues(&sys)?;
    let summary = summarize(&spec);
    write_output(&opts.out, SPECTRUM_FILE, &spec.to_csv())?;
    write_output(&opts.out, SPECTRUM_SUMMARY_FILE, &to_json(&summary))?;
    RunManifest::new(
        "spectrum",
        &loaded.path,
        &loaded.spec,
        &Parameters { cells: opts.cells },
        &[SPECTRUM_FILE, SPECTRUM_SUMMARY_FILE, MANIFEST_FILE],
    )
    .write(&opts.out)?;
    Ok(Outcome {
        code: EXIT_OK,
        stdout: to_json(&summary),
    })
}
