//! Run manifests: a small JSON record written next to every artifact so a
//! result can be traced back to the exact invocation that produced it.
//!
//! Everything in the manifest except `wall_time_s` is a pure function of the
//! command line, so re-running a command reproduces the manifest byte for
//! byte once that one field is ignored.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use gaitloop::ingest::atomic_write;
use gaitloop::Result;
use serde::Serialize;

/// What was run, on what, producing what.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    /// Subcommand name.
    pub command: String,
    /// Arguments as given, program name excluded.
    pub argv: Vec<String>,
    /// Every seed the run consumed, by role.
    pub seeds: BTreeMap<String, u64>,
    /// Files read.
    pub inputs: Vec<String>,
    /// Files written (this manifest excluded).
    pub outputs: Vec<String>,
    pub tool_version: String,
    /// Wall-clock duration of the run; the one field that varies between
    /// otherwise identical runs.
    pub wall_time_s: f64,
}

/// Accumulates manifest fields while a command runs, then writes the record.
pub struct RunRecorder {
    command: String,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    started: Instant,
}

impl RunRecorder {
    pub fn new(command: &str) -> Self {
        RunRecorder {
            command: command.to_string(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn seed(&mut self, role: &str, value: u64) {
        self.seeds.insert(role.to_string(), value);
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    /// Record an output path and hand it back, so call sites can register
    /// the file in the same expression that writes it.
    pub fn output(&mut self, path: std::path::PathBuf) -> std::path::PathBuf {
        self.outputs.push(path.display().to_string());
        path
    }

    /// Write the manifest itself to `path`.
    pub fn finish(self, path: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            argv: std::env::args().skip(1).collect(),
            seeds: self.seeds,
            inputs: self.inputs,
            outputs: self.outputs,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .expect("run manifest serializes");
        text.push('\n');
        atomic_write(path, text.as_bytes())
    }
}
