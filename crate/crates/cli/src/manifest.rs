//! `manifest.json`: what was run, with which resolved settings, and which files it wrote.

use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

fn now() -> String {
    let since = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default();
    DateTime::<Utc>::from_timestamp(since.as_secs() as i64, since.subsec_nanos())
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_default()
}

/// Collects the files of one run and writes them next to a manifest.
pub struct Run {
    command: &'static str,
    config: Value,
    seed: u64,
    out: PathBuf,
    started: String,
    files: Vec<String>,
}

impl Run {
    /// `config` is the fully resolved configuration; its canonical JSON is hashed.
    pub fn start(
        command: &'static str,
        config: Value,
        seed: u64,
        out: &Path,
    ) -> std::io::Result<Self> {
        std::fs::create_dir_all(out)?;
        Ok(Self {
            command,
            config,
            seed,
            out: out.to_path_buf(),
            started: now(),
            files: Vec::new(),
        })
    }

    /// Creates `name` in the output directory and records it.
    pub fn create(&mut self, name: &str) -> std::io::Result<std::io::BufWriter<std::fs::File>> {
        self.files.push(name.to_string());
        Ok(std::io::BufWriter::new(std::fs::File::create(
            self.out.join(name),
        )?))
    }

    pub fn finish(self) -> std::io::Result<()> {
        let manifest = json!({
            "command": self.command,
            "config": self.config,
            "config_digest": config_digest(&self.config),
            "seed": self.seed,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "started_at": self.started,
            "finished_at": now(),
            "files": self.files,
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        std::fs::write(self.out.join("manifest.json"), text + "\n")
    }
}

/// SHA-256 of the compact JSON form; object keys are sorted, so the text is canonical.
pub fn config_digest(config: &Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"t0": 500, "seed": 1}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"seed": 1, "t0": 500}"#).unwrap();
        assert_eq!(config_digest(&a), config_digest(&b));
        assert_ne!(
            config_digest(&a),
            config_digest(&json!({"t0": 501, "seed": 1}))
        );
        assert_eq!(config_digest(&a).len(), 64);
    }
}
