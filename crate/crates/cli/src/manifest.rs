//! Run manifests: one JSON document per artifact-producing command, recording
//! what went in, what came out, and how to run it again.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_PREFIX: &str = "manifest-";
/// Leaderboard timing column; excluded from replay comparison.
pub const VOLATILE_COLUMN: &str = "wall_time";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactDigest {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256_without_wall_time: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub cwd: PathBuf,
    pub argv: Vec<String>,
}

/// Field order is part of the format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub timestamp: String,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<InputDigest>,
    pub config: serde_json::Value,
    pub artifacts: Vec<ArtifactDigest>,
    pub tool_version: String,
    pub args: Invocation,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Schema(format!("{}: not a run manifest: {e}", path.display())))
    }

    pub fn artifact_path(&self, dir: &Path, name: &str) -> Option<PathBuf> {
        self.artifacts
            .iter()
            .find(|a| a.path == name)
            .map(|a| dir.join(&a.path))
    }

    pub fn input(&self, role: &str) -> Option<&InputDigest> {
        self.inputs.iter().find(|i| i.role == role)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path.display(), e))?;
    Ok(sha256_hex(&bytes))
}

/// Digest of a CSV with the timing column removed, or `None` when the file
/// has no such column.
pub fn digest_without_wall_time(bytes: &[u8]) -> Option<String> {
    let text = std::str::from_utf8(bytes).ok()?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next()?.split(',').collect();
    let col = header.iter().position(|h| *h == VOLATILE_COLUMN)?;
    let mut kept = String::new();
    for line in std::iter::once(header.join(",")).chain(lines.map(String::from)) {
        let cells: Vec<&str> = line.split(',').collect();
        let row: Vec<&str> = cells
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != col)
            .map(|(_, c)| *c)
            .collect();
        kept.push_str(&row.join(","));
        kept.push('\n');
    }
    Some(sha256_hex(kept.as_bytes()))
}

/// Collects artifacts written to one output directory, then writes the
/// manifest describing them.
pub struct Outputs {
    dir: PathBuf,
    artifacts: Vec<ArtifactDigest>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(path.display(), e))?;
        self.artifacts.push(ArtifactDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            sha256_without_wall_time: digest_without_wall_time(bytes),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn finish(self, run: RunRecord) -> Result<PathBuf> {
        let manifest = Manifest {
            command: run.command,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seeds: run.seeds,
            inputs: run.inputs,
            config: run.config,
            artifacts: self.artifacts,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            args: run.invocation,
        };
        let path = self.dir.join(format!("{MANIFEST_PREFIX}{}.json", run.stem));
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| CliError::io(path.display(), e))?;
        Ok(path)
    }
}

/// Everything but the artifact list that goes into a manifest.
pub struct RunRecord {
    pub command: String,
    pub stem: String,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<InputDigest>,
    pub config: serde_json::Value,
    pub invocation: Invocation,
}

pub fn input_digest(role: &str, path: &Path) -> Result<InputDigest> {
    let abs = fs::canonicalize(path).map_err(|e| CliError::io(path.display(), e))?;
    Ok(InputDigest {
        role: role.to_string(),
        sha256: digest_file(&abs)?,
        path: abs,
    })
}
