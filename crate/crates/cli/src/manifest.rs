//! Run manifests and atomic output writing.
//!
//! Every invocation emits a manifest next to its primary output (or to the
//! explicit path) recording the effective configuration, toolkit version,
//! resolution/tolerance records, wall time, and SHA-256 digests of every
//! result file. Outputs are written to a temporary file in the target
//! directory and renamed into place, so interrupted runs leave no partial
//! non-temp files.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub toolkit_version: String,
    pub config: BTreeMap<String, serde_json::Value>,
    /// Grid / tolerance record of the run.
    pub resolution: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    pub wall_time_s: f64,
    pub success: bool,
    /// SHA-256 digests of every written result file.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: BTreeMap<String, serde_json::Value>, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            resolution: BTreeMap::new(),
            seed,
            wall_time_s: 0.0,
            success: false,
            outputs: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.resolution.insert(key.to_string(), value.into());
    }

    /// Write bytes atomically and record the digest.
    pub fn write_output(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        let digest = Sha256::digest(bytes);
        self.outputs
            .insert(path.display().to_string(), hex::encode(digest));
        Ok(())
    }

    /// Persist the manifest itself (atomic as well).
    pub fn finish(mut self, path: &Path, started: std::time::Instant, success: bool) -> Result<()> {
        self.success = success;
        self.wall_time_s = started.elapsed().as_secs_f64();
        let bytes = serde_json::to_vec_pretty(&self)?;
        write_atomic(path, &bytes)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    std::fs::write(tmp.path(), bytes)?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Manifest path convention: `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut os = out.as_os_str().to_owned();
    os.push(".manifest.json");
    PathBuf::from(os)
}
