use crate::config::ExperimentConfig;
use crate::error::LabError;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLOT_SCRIPT_FILE: &str = "plot.gnuplot";

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
    /// Set for files that belong to a single seed.
    pub seed: Option<u64>,
}

/// In-memory outputs of one experiment, written in one go by
/// [`write_artifacts`].
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<Artifact>,
    /// Human-readable summary printed on success.
    pub summary: Vec<String>,
    /// Error to report after the files are written (solver flags).
    pub deferred: Option<LabError>,
}

impl Artifacts {
    pub fn push(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push(Artifact { name: name.into(), bytes, seed: None });
    }

    pub fn push_seed(&mut self, name: impl Into<String>, bytes: Vec<u8>, seed: u64) {
        self.files.push(Artifact { name: name.into(), bytes, seed: Some(seed) });
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|a| a.name == name).map(|a| a.bytes.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub tool_version: String,
    pub kind: String,
    /// Milliseconds since the Unix epoch at run start.
    pub started_unix_ms: u128,
    pub outputs: Vec<String>,
    pub per_seed_outputs: BTreeMap<u64, Vec<String>>,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, started: SystemTime) -> Self {
        RunManifest {
            config_digest: config.digest.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            kind: config.kind.name().to_string(),
            started_unix_ms: started.duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0),
            outputs: Vec::new(),
            per_seed_outputs: BTreeMap::new(),
        }
    }
}

/// Writes every artifact into `dir` (created if needed) followed by the
/// manifest. Returns the manifest.
pub fn write_artifacts(
    dir: &Path,
    artifacts: &Artifacts,
    mut manifest: RunManifest,
) -> Result<RunManifest, LabError> {
    fs::create_dir_all(dir).map_err(LabError::io(dir))?;
    for a in &artifacts.files {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(LabError::io(&path))?;
        manifest.outputs.push(a.name.clone());
        if let Some(seed) = a.seed {
            manifest.per_seed_outputs.entry(seed).or_default().push(a.name.clone());
        }
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, json_bytes(&manifest)).map_err(LabError::io(&path))?;
    Ok(manifest)
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("summary values serialize");
    bytes.push(b'\n');
    bytes
}

/// Comma-separated, LF-terminated, header first.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn resolve_run_dir(out_root: &Path, config: &ExperimentConfig) -> PathBuf {
    out_root.join(&config.output)
}
