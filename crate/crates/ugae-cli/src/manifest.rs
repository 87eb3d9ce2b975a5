//! Run manifests: a JSON record of what a command did — configuration
//! snapshot, per-stage wall time, and SHA-256 checksums of every input
//! and output file.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{Category, CliResult, WithCategory};

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub wall_ms: u64,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.into(),
            config,
            stages: Vec::new(),
        }
    }

    pub fn push_stage(
        &mut self,
        name: impl Into<String>,
        started: Instant,
        inputs: Vec<FileRecord>,
        outputs: Vec<FileRecord>,
    ) {
        self.stages.push(StageRecord {
            name: name.into(),
            wall_ms: started.elapsed().as_millis() as u64,
            inputs,
            outputs,
        });
    }

    pub fn write(&self, path: &Path) -> CliResult {
        let bytes = serde_json::to_vec_pretty(self).category(Category::Io)?;
        std::fs::write(path, bytes).category(Category::Io)
    }
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).category(Category::Io)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

pub fn file_record(path: &Path) -> CliResult<FileRecord> {
    Ok(FileRecord {
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}
