use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use beamtrack::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub elapsed_secs: Option<f64>,
    /// `running`, `ok`, or `failed: <message>`.
    pub status: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Writes the manifest when created and again when finished.
pub struct ManifestGuard {
    manifest: RunManifest,
    path: PathBuf,
    started: Instant,
}

impl ManifestGuard {
    pub fn start(
        command: &str,
        config_path: Option<&Path>,
        config_hash: Option<String>,
        seed: Option<u64>,
        out_dir: &Path,
    ) -> Result<Self> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", out_dir.display())))?;
        let manifest = RunManifest {
            command: command.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            config_hash,
            seed,
            out_dir: out_dir.to_path_buf(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: now(),
            finished_unix: None,
            elapsed_secs: None,
            status: "running".into(),
        };
        let g = Self { manifest, path: out_dir.join(MANIFEST_FILE), started: Instant::now() };
        g.write()?;
        Ok(g)
    }

    fn write(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(&self.path, text + "\n").map_err(|e| Error::Config(format!("{}: {e}", self.path.display())))
    }

    pub fn finish<T>(mut self, outcome: &Result<T>) -> Result<()> {
        self.manifest.finished_unix = Some(now());
        self.manifest.elapsed_secs = Some(self.started.elapsed().as_secs_f64());
        self.manifest.status = match outcome {
            Ok(_) => "ok".into(),
            Err(e) => format!("failed: {e}"),
        };
        self.write()
    }
}
