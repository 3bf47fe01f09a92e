//! Run manifests.  Every command records its effective parameter vector
//! and the SHA-256 digests of the files it read and wrote; `rerun`
//! re-executes the recorded argv and compares output digests byte for
//! byte.  Wall-clock time is informational and excluded from the
//! reproducibility identity.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileDigest {
    /// Output paths are relative to the run's output directory; input
    /// paths are recorded exactly as given on the command line.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Effective argument vector after config-file resolution, excluding
    /// `--out-dir` (so a rerun can redirect it).
    pub argv: Vec<String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Informational only — not part of the reproducibility identity.
    pub wall_clock_seconds: f64,
}

pub fn sha256_hex(path: &Path) -> anyhow::Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("digesting {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Collects what a command touches and writes `manifest_<command>.json`
/// when the run completes.
pub struct RunRecorder {
    command: String,
    argv: Vec<String>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl RunRecorder {
    pub fn new(command: &str, argv: Vec<String>) -> Self {
        RunRecorder {
            command: command.to_owned(),
            argv,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_owned());
    }

    /// Register a file written inside the output directory.
    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_owned());
    }

    /// Digest everything and write the manifest into `out_dir`.
    pub fn finish(self, out_dir: &Path) -> anyhow::Result<PathBuf> {
        let digest_of = |path: &Path, name: String| -> anyhow::Result<FileDigest> {
            Ok(FileDigest {
                path: name,
                sha256: sha256_hex(path)?,
            })
        };
        let inputs = self
            .inputs
            .iter()
            .map(|p| digest_of(p, p.display().to_string()))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(|p| {
                let name = p
                    .strip_prefix(out_dir)
                    .unwrap_or(p)
                    .display()
                    .to_string();
                digest_of(p, name)
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let manifest = RunManifest {
            tool: "nlsh".to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: self.command.clone(),
            argv: self.argv,
            inputs,
            outputs,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = out_dir.join(format!("manifest_{}.json", self.command));
        artifacts::write_json(&path, &manifest)?;
        Ok(path)
    }
}

pub fn load_manifest(path: &Path) -> anyhow::Result<RunManifest> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing manifest {}", path.display()))
}
