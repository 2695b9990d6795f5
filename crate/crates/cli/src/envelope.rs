//! Machine-readable result envelope written by every command.

use crate::config::ExperimentConfig;
use anyhow::{Context, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct CriterionResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CriterionResult {
    /// `value <= threshold` passes.
    pub fn upper(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    pub fn boolean(name: &str, pass: bool) -> Self {
        Self {
            name: name.into(),
            value: if pass { 1.0 } else { 0.0 },
            threshold: 1.0,
            pass,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Envelope {
    pub schema: u32,
    pub command: String,
    pub config_hash: String,
    pub inputs: ExperimentConfig,
    pub metrics: BTreeMap<String, serde_json::Value>,
    pub criteria: Vec<CriterionResult>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Envelope {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            schema: 1,
            command: command.into(),
            config_hash: cfg.hash(),
            inputs: cfg.clone(),
            metrics: BTreeMap::new(),
            criteria: Vec::new(),
            status: "ok".into(),
            error: None,
        }
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics
            .insert(key.into(), serde_json::to_value(value).expect("metric"));
    }

    pub fn push(&mut self, criterion: CriterionResult) {
        self.criteria.push(criterion);
    }

    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn finalize_status(&mut self) {
        if !self.all_pass() {
            self.status = "criterion_failed".into();
        }
    }
}

/// Results directory for one command run: `<out>/<command>/<hash>/`.
pub struct RunDir {
    pub path: PathBuf,
    csv_enabled: bool,
}

impl RunDir {
    pub fn create(out_root: &Path, command: &str, cfg: &ExperimentConfig) -> Result<Self> {
        let path = out_root.join(command).join(cfg.hash());
        std::fs::create_dir_all(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        Ok(Self {
            path,
            csv_enabled: cfg.output.formats.iter().any(|f| f == "csv"),
        })
    }

    pub fn write_envelope(&self, envelope: &Envelope) -> Result<PathBuf> {
        let file = self.path.join("summary.json");
        let json = serde_json::to_string_pretty(envelope)?;
        std::fs::write(&file, json + "\n")?;
        Ok(file)
    }

    /// Writes rows as CSV with the given header (no-op when the config
    /// disabled the format).
    pub fn write_csv(&self, name: &str, header: &str, rows: &[Vec<String>]) -> Result<()> {
        if !self.csv_enabled {
            return Ok(());
        }
        let mut text = String::with_capacity(rows.len() * 24 + header.len() + 1);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        std::fs::write(self.path.join(name), text)?;
        Ok(())
    }
}

pub fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}
