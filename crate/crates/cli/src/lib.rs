//! Command implementations behind the `graphwave` binary.
//!
//! Every command reads a network file, runs one stage of the pipeline and
//! returns an [`Outcome`]: the process exit code and the text for stdout.
//! Commands that write files also write a [`RunManifest`] next to them.

pub mod commands;
pub mod manifest;

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use graphwave::{Network, NetworkSpec};

pub use commands::report::{cmd_report, ReportOptions};
pub use commands::resolvent::{cmd_resolvent, ResolventOptions};
pub use commands::simulate::{cmd_simulate, SimulateOptions};
pub use commands::spectrum::{cmd_spectrum, SpectrumOptions};
pub use commands::validate::{cmd_validate, ValidateOptions};
pub use manifest::RunManifest;

/// Exit code for a passing run.
pub const EXIT_OK: i32 = 0;
/// Exit code for a negative verdict (validation failure, disagreement).
pub const EXIT_NEGATIVE: i32 = 1;
/// Exit code for unreadable input or a failed computation.
pub const EXIT_ERROR: i32 = 2;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "GRAPHWAVE_THREADS";

/// Default cells per edge for every command.
pub const DEFAULT_CELLS: usize = 64;

/// Result of a command: exit code plus what to print.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

/// A parsed network file.
#[derive(Debug, Clone)]
pub struct Loaded {
    /// the path as given on the command line
    pub path: String,
    pub spec: NetworkSpec,
    pub network: Network,
}

/// Reads and validates the schema, ids and topology of a network file.
pub fn load(path: &Path) -> Result<Loaded> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let spec = NetworkSpec::from_json(&text)
        .with_context(|| format!("cannot parse {}", path.display()))?;
    let network =
        Network::from_spec(&spec).with_context(|| format!("invalid network {}", path.display()))?;
    Ok(Loaded {
        path: path.display().to_string(),
        spec,
        network,
    })
}

/// Applies `GRAPHWAVE_THREADS` to the global worker pool. Returns the thread
/// count when the variable is set.
pub fn configure_threads() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        bail!("{THREADS_ENV} must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot configure the worker pool")?;
    Ok(Some(n))
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub(crate) fn write_output(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Pretty JSON with a trailing newline.
pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
