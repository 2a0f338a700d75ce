//! Run manifests: everything needed to reproduce an output file exactly.
//!
//! Each output `x` gets a sidecar `x.manifest.json`.

use std::path::{Path, PathBuf};

use ratio_cpd::{BenchmarkPlan, DatasetId, DetectorConfig};
use serde::{Deserialize, Serialize};

use crate::output::{write_atomic, Classify, CliResult, Failure};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Source {
    Generator { dataset: DatasetId, seed: u64 },
    Series { path: PathBuf, header: bool },
    Scores { scores: PathBuf, labels: PathBuf },
    Benchmark { plan: Box<BenchmarkPlan> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<DetectorConfig>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, source: Source, detector: Option<DetectorConfig>, outputs: Vec<PathBuf>) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            source,
            detector,
            outputs,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).input(format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| Failure::data(format!("malformed manifest {}: {e}", path.display())))
    }

    /// Loads a manifest and checks it was written by `command`.
    pub fn load_for(path: &Path, command: &str) -> CliResult<Self> {
        let m = Self::load(path)?;
        if m.command != command {
            return Err(Failure::usage(format!(
                "{} is a '{}' manifest, not '{command}'",
                path.display(),
                m.command
            )));
        }
        Ok(m)
    }

    pub fn save_beside(&self, output: &Path) -> CliResult<PathBuf> {
        let path = sidecar(output);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(&path, |w| writeln!(w, "{text}"))?;
        Ok(path)
    }

    pub fn output(&self, i: usize) -> CliResult<&Path> {
        self.outputs
            .get(i)
            .map(PathBuf::as_path)
            .ok_or_else(|| Failure::data("manifest lists too few outputs"))
    }
}

pub fn sidecar(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
