//! Artifact writing: every file carries the schema version, the seed and
//! the sha-256 of the raw config bytes, so a report can always be traced
//! back to the exact run that produced it.

use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use svi_lab::experiments::ExperimentReport;
use svi_lab::paths::GridPath;
use svi_lab::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct RunContext {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub out_dir: PathBuf,
}

impl RunContext {
    pub fn metadata_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("schema_version".into(), SCHEMA_VERSION.to_string()),
            ("command".into(), self.command.clone()),
            ("seed".into(), self.seed.to_string()),
            ("config_sha256".into(), self.config_sha256.clone()),
        ]
    }

    fn wrap(&self, body: Value) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "seed": self.seed,
            "config_sha256": self.config_sha256,
            "report": body,
        })
    }

    pub fn write_json(&self, name: &str, body: Value) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        let text = serde_json::to_string_pretty(&self.wrap(body))
            .map_err(|e| svi_lab::Error::Parse(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }

    pub fn write_report(&self, report: &ExperimentReport, format: OutputFormat) -> Result<()> {
        if format.json() {
            let body = serde_json::to_value(report)
                .map_err(|e| svi_lab::Error::Parse(e.to_string()))?;
            self.write_json("report.json", body)?;
        }
        if format.csv() {
            let mut text = String::new();
            for (k, v) in self.metadata_pairs() {
                text.push_str(&format!("# {k}={v}\n"));
            }
            text.push_str(&report.to_csv());
            std::fs::write(self.out_dir.join("report.csv"), text)?;
        }
        Ok(())
    }

    pub fn write_path_csv(&self, name: &str, path: &GridPath) -> Result<()> {
        let file = std::fs::File::create(self.out_dir.join(name))?;
        path.write_csv(std::io::BufWriter::new(file), &self.metadata_pairs())
    }

    /// Machine-readable failure record; best-effort, errors here must not
    /// mask the original failure.
    pub fn write_error(&self, kind: &str, message: &str) {
        let body = json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "seed": self.seed,
            "config_sha256": self.config_sha256,
            "error_kind": kind,
            "message": message,
        });
        if std::fs::create_dir_all(&self.out_dir).is_ok() {
            if let Ok(text) = serde_json::to_string_pretty(&body) {
                let _ = std::fs::write(self.out_dir.join("error.json"), text + "\n");
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

impl OutputFormat {
    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}
