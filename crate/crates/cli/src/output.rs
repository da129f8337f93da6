//! Run directories: exclusive lock, tracked outputs and JSON manifests.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const LOCK_NAME: &str = ".xmaml.lock";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Hex hash of the full configuration.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
    pub details: BTreeMap<String, serde_json::Value>,
}

/// Output directory held for the lifetime of one command.
pub struct RunDir {
    root: PathBuf,
    lock: PathBuf,
    files: Vec<String>,
    timings: BTreeMap<String, f64>,
}

impl RunDir {
    pub fn open(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        let lock = root.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(CliError::Locked(root.to_path_buf(), lock));
            }
            Err(e) => return Err(CliError::io(&lock, e)),
        }
        Ok(RunDir {
            root: root.to_path_buf(),
            lock,
            files: Vec::new(),
            timings: BTreeMap::new(),
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Writes `rel` under the run directory and records it for the manifest.
    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(rel.to_string());
        Ok(path)
    }

    pub fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings
            .insert(label.to_string(), start.elapsed().as_secs_f64() * 1e3);
        out
    }

    /// Writes `manifests/<name>.json` after checking every listed output exists.
    pub fn finish(
        mut self,
        name: &str,
        command: &str,
        config_hash: u64,
        config: serde_json::Value,
        seeds: BTreeMap<String, u64>,
        details: BTreeMap<String, serde_json::Value>,
    ) -> Result<PathBuf, CliError> {
        if let Some(missing) = self.files.iter().find(|f| !self.root.join(f).is_file()) {
            return Err(CliError::MissingInput(self.root.join(missing)));
        }
        let manifest = RunManifest {
            command: command.to_string(),
            config_hash: format!("{config_hash:016x}"),
            config,
            seeds,
            files: std::mem::take(&mut self.files),
            timings_ms: std::mem::take(&mut self.timings),
            details,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        self.write(&format!("manifests/{name}.json"), text + "\n")
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}
