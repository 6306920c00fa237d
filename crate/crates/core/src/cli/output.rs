use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::CliError;

/// One file produced by a run, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointStatus {
    pub index: usize,
    pub label: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config: ExperimentConfig,
    pub points: Vec<PointStatus>,
    pub outputs: Vec<OutputEntry>,
    pub summary: serde_json::Value,
}

pub const MANIFEST: &str = "manifest.json";

/// Writes `bytes` to `dir/name` through a temporary sibling and a rename, so a
/// reader never sees a truncated file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    let io = |e: std::io::Error, p: &Path| CliError::Io(format!("{}: {e}", p.display()));
    let mut f = fs::File::create(&tmp).map_err(|e| io(e, &tmp))?;
    f.write_all(bytes).map_err(|e| io(e, &tmp))?;
    f.sync_all().map_err(|e| io(e, &tmp))?;
    drop(f);
    fs::rename(&tmp, &target).map_err(|e| io(e, &target))
}

/// Collects the files of one sweep point (or of the whole run).
#[derive(Debug)]
pub struct Sink<'a> {
    dir: &'a Path,
    point: Option<usize>,
    pub entries: Vec<OutputEntry>,
}

impl<'a> Sink<'a> {
    pub fn new(dir: &'a Path, point: Option<usize>) -> Self {
        Self {
            dir,
            point,
            entries: Vec::new(),
        }
    }

    pub fn bytes(&mut self, name: &str, kind: &'static str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(self.dir, name, bytes)?;
        self.entries.push(OutputEntry {
            path: name.to_string(),
            kind,
            point: self.point,
        });
        Ok(())
    }

    /// Buffers whatever `fill` writes, then stores it atomically.
    pub fn with<E: std::fmt::Display>(
        &mut self,
        name: &str,
        kind: &'static str,
        fill: impl FnOnce(&mut Vec<u8>) -> Result<(), E>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        self.bytes(name, kind, &buf)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, kind: &'static str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        text.push('\n');
        self.bytes(name, kind, text.as_bytes())
    }
}

pub fn prepare_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}
