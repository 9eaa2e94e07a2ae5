use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Written beside every artifact as `<artifact>.manifest.json` (or
/// `manifest.json` inside an output directory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_time_ms: u128,
}

/// Collects input and output digests during a run.
pub struct Recorder {
    started: Instant,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl Default for Recorder {
    fn default() -> Self {
        Recorder {
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }
}

impl Recorder {
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256: psyling::sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> Result<String, CliError> {
        String::from_utf8(self.read(path)?).map_err(|e| CliError::domain("parse", format!("{}: {e}", path.display())))
    }

    pub fn note_input(&mut self, path: &Path) -> Result<(), CliError> {
        self.read(path).map(|_| ())
    }

    /// Records a file written by someone else (a bundle member, say).
    pub fn note_output(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.outputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256: psyling::sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
        self.outputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256: psyling::sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn finish(self, at: &Path, command: Vec<String>, config: serde_json::Value, seed: u64) -> Result<(), CliError> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            config,
            seed,
            inputs: self.inputs,
            outputs: self.outputs,
            wall_time_ms: self.started.elapsed().as_millis(),
        };
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        std::fs::write(at, json).map_err(|e| CliError::io(at, e))
    }
}

/// `<out>.manifest.json`, or `<dir>/manifest.json` for directory outputs.
pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}
