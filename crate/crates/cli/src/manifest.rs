//! The record written next to every output.

use std::path::Path;

use anyhow::Result;
use graphwave::discretize::WELLPOSED_SEED;
use graphwave::NetworkSpec;
use serde::Serialize;

use crate::{to_json, write_output};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub graphwave: &'static str,
    pub graphwave_cli: &'static str,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            graphwave: graphwave::VERSION,
            graphwave_cli: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Everything needed to reproduce a run: the resolved network and options,
/// the random seed and the versions. Output paths are relative to the
/// manifest's directory. Thread counts are not recorded because results do
/// not depend on them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub versions: Versions,
    pub spec_path: String,
    pub spec: NetworkSpec,
    pub options: serde_json::Value,
    /// seed of the random states drawn by the well-posedness check
    pub seed: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new<O: Serialize>(
        command: &str,
        spec_path: &str,
        spec: &NetworkSpec,
        options: &O,
        outputs: &[&str],
    ) -> Self {
        Self {
            command: command.to_string(),
            versions: Versions::default(),
            spec_path: spec_path.to_string(),
            spec: spec.clone(),
            options: serde_json::to_value(options).expect("options serialize"),
            seed: WELLPOSED_SEED,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_output(dir, MANIFEST_FILE, &to_json(self))
    }
}
