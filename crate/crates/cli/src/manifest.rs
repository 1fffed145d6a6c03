//! Run manifests: what was run, with which resolved settings, how long each
//! stage took, and which files it produced.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::format::{read_json, write_file};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

/// An output file named by its suffix relative to the `--out` prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub suffix: String,
    pub path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub ttm_cli: String,
    pub ttm_core: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            ttm_cli: env!("CARGO_PKG_VERSION").to_string(),
            ttm_core: ttm_core::VERSION.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments as typed.
    pub argv: Vec<String>,
    /// Fully resolved arguments (absolute input paths, config merged into
    /// flags, no `--out`); `ttm replay` re-runs these.
    pub replay: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub versions: Versions,
    pub timings: Vec<StageTime>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        read_json(path)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Data(format!("cannot serialize manifest: {e}")))?;
        text.push('\n');
        write_file(path, text.as_bytes())
    }
}

/// Wall-clock stage timer.
pub struct Timer {
    last: Instant,
    pub stages: Vec<StageTime>,
}

impl Default for Timer {
    fn default() -> Self {
        Self::new()
    }
}

impl Timer {
    pub fn new() -> Self {
        Self {
            last: Instant::now(),
            stages: Vec::new(),
        }
    }

    pub fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push(StageTime {
            stage: stage.to_string(),
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }
}

/// `PREFIX` + `suffix` as a path (`out/run` + `.model.json`).
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn absolute(path: &Path) -> String {
    std::path::absolute(path)
        .unwrap_or_else(|_| path.to_path_buf())
        .display()
        .to_string()
}
