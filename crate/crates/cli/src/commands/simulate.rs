//! `graphwave simulate`: Crank-Nicolson run, energy trace and decay fits.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use graphwave::simulate::{
    check_dissipation, default_dt, fit_exponential, fit_power, initial_state, run, DecayFit,
    EnergyTrace, FieldSpec,
};
use graphwave::DiscreteSystem;
use serde::Serialize;

use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::{load, to_json, write_output, Outcome, DEFAULT_CELLS, EXIT_OK};

pub const TRACE_FILE: &str = "trace.csv";
pub const FIT_FILE: &str = "fit.json";

/// Default exponential fit window.
pub const EXPONENTIAL_WINDOW: [f64; 2] = [5.0, 50.0];
/// Default power-law fit window.
pub const POWER_WINDOW: [f64; 2] = [20.0, 200.0];
/// Default final time, long enough for both windows.
pub const DEFAULT_T_END: f64 = 200.0;
/// Tolerance of the per-step dissipation identity, relative to `E(0)`.
pub const DISSIPATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub spec: PathBuf,
    pub out: PathBuf,
    pub cells: usize,
    /// time step; `None` for half the smallest cell width
    pub dt: Option<f64>,
    pub t_end: f64,
    pub sample_every: usize,
    pub u0: FieldSpec,
    pub v0: FieldSpec,
    pub exponential_window: [f64; 2],
    pub power_window: [f64; 2],
}

impl SimulateOptions {
    pub fn new(spec: PathBuf, out: PathBuf) -> Self {
        Self {
            spec,
            out,
            cells: DEFAULT_CELLS,
            dt: None,
            t_end: DEFAULT_T_END,
            sample_every: 1,
            u0: FieldSpec::low_modes(),
            v0: FieldSpec::Zero,
            exponential_window: EXPONENTIAL_WINDOW,
            power_window: POWER_WINDOW,
        }
    }
}

/// Run parameters after defaults are resolved, as recorded in manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunParameters {
    pub cells: usize,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub u0: FieldSpec,
    pub v0: FieldSpec,
    pub exponential_window: [f64; 2],
    pub power_window: [f64; 2],
}

/// A decay fit, or why it could not be made.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FitResult {
    Fit(DecayFit),
    Failed { error: String },
}

impl FitResult {
    pub fn fit(&self) -> Option<&DecayFit> {
        match self {
            FitResult::Fit(f) => Some(f),
            FitResult::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationSummary {
    /// largest `|ΔE/Δt + v_midᵀK_a v_mid| / E(0)` over all steps
    pub max_relative_residual: f64,
    /// per-step identity within tolerance; `None` unless every step is sampled
    pub identity_holds: Option<bool>,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub dofs: usize,
    pub steps: usize,
    pub dt: f64,
    pub t_end: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub dissipation: DissipationSummary,
    pub exponential: FitResult,
    pub power: FitResult,
}

/// A field argument: `zero`, `low-modes`, inline JSON, or a JSON file.
pub fn parse_field(arg: &str) -> Result<FieldSpec> {
    match arg.trim() {
        "zero" => Ok(FieldSpec::Zero),
        "low-modes" => Ok(FieldSpec::low_modes()),
        s if s.starts_with('{') => {
            serde_json::from_str(s).with_context(|| format!("cannot parse field `{s}`"))
        }
        path => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {path}"))?;
            serde_json::from_str(&text).with_context(|| format!("cannot parse field file {path}"))
        }
    }
}

fn fit(result: Result<DecayFit, graphwave::SimulateError>) -> FitResult {
    match result {
        Ok(f) => FitResult::Fit(f),
        Err(e) => FitResult::Failed { error: e.to_string() },
    }
}

/// Integrates `sys` and fits the trace.
pub fn simulate_system(
    sys: &DiscreteSystem,
    params: &RunParameters,
) -> Result<(EnergyTrace, SimulationSummary)> {
    let state = initial_state(sys, &params.u0, &params.v0)?;
    let trace = run(sys, &state, params.dt, params.t_end, params.sample_every)?;
    let summary = SimulationSummary {
        dofs: sys.n(),
        steps: ((params.t_end / params.dt).round() as usize).max(1),
        dt: params.dt,
        t_end: params.t_end,
        initial_energy: trace.initial_energy(),
        final_energy: trace.final_energy(),
        dissipation: DissipationSummary {
            max_relative_residual: trace.max_relative_residual(),
            identity_holds: (trace.sample_every == 1)
                .then(|| check_dissipation(&trace, DISSIPATION_TOL, 0.0)),
            monotone: trace.is_monotone(1e-10),
        },
        exponential: fit(fit_exponential(&trace, params.exponential_window)),
        power: fit(fit_power(&trace, params.power_window)),
    };
    Ok((trace, summary))
}

/// Resolves defaults against the discretized system.
pub fn resolve(opts: &SimulateOptions, sys: &DiscreteSystem) -> RunParameters {
    RunParameters {
        cells: opts.cells,
        dt: opts.dt.unwrap_or_else(|| default_dt(sys)),
        t_end: opts.t_end,
        sample_every: opts.sample_every.max(1),
        u0: opts.u0.clone(),
        v0: opts.v0.clone(),
        exponential_window: opts.exponential_window,
        power_window: opts.power_window,
    }
}

/// Writes `trace.csv`, `fit.json` and the manifest into `opts.out`.
pub fn cmd_simulate(opts: &SimulateOptions) -> Result<Outcome> {
    let loaded = load(&opts.spec)?;
    let net = &loaded.network;
    let sys = net.discretize(&net.resolution(opts.cells))?;
    let params = resolve(opts, &sys);
    let (trace, summary) = simulate_system(&sys, &params)?;
    write_output(&opts.out, TRACE_FILE, &trace.to_csv())?;
    write_output(&opts.out, FIT_FILE, &to_json(&summary))?;
    RunManifest::new(
        "simulate",
        &loaded.path,
        &loaded.spec,
        &params,
        &[TRACE_FILE, FIT_FILE, MANIFEST_FILE],
    )
    .write(&opts.out)?;
    Ok(Outcome {
        code: EXIT_OK,
        stdout: to_json(&summary),
    })
}
