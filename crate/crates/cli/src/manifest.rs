use std::path::{Path, PathBuf};

use hrlt_core::model::hex;
use hrlt_core::{Config, Error, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.txt";
pub const METRICS: &str = "metrics.csv";
pub const BEST: &str = "best.ckpt";
pub const LAST: &str = "last.ckpt";

pub fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Everything a training run writes, relative to its run directory unless
/// an explicit path was given.
pub struct RunManifest {
    pub command: &'static str,
    pub config: Config,
    pub corpora: Vec<(&'static str, PathBuf, String, usize)>,
    pub encoder_fingerprint: Option<String>,
    pub start_checkpoint: Option<PathBuf>,
    pub trace_dump: Option<PathBuf>,
    pub status: String,
    pub best: Option<(String, usize, f64)>,
}

impl RunManifest {
    pub fn to_json(&self) -> Value {
        let corpora: serde_json::Map<String, Value> = self
            .corpora
            .iter()
            .map(|(role, path, sha, n)| {
                (role.to_string(), json!({ "path": path.display().to_string(), "sha256": sha, "sentences": n }))
            })
            .collect();
        json!({
            "command": self.command,
            "status": self.status,
            "seed": self.config.train.seed,
            "config": CONFIG,
            "config_sha256": hex(&self.config.hash()),
            "encoder": self.config.run.encoder.to_string(),
            "encoder_fingerprint": self.encoder_fingerprint,
            "corpora": corpora,
            "start_checkpoint": self.start_checkpoint.as_ref().map(|p| p.display().to_string()),
            "metrics": METRICS,
            "checkpoints": { "best": BEST, "last": LAST },
            "trace_dump": self.trace_dump.as_ref().map(|p| p.display().to_string()),
            "best": self.best.as_ref().map(|(phase, epoch, f1)| json!({ "phase": phase, "epoch": epoch, "dev_f1": f1 })),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&self.to_json()).expect("manifest serialises") + "\n";
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))
    }
}
