//! Experiment configuration: JSON in, strictly validated, hashed for the
//! result envelope. Unknown keys are rejected.

use anyhow::{bail, Context, Result};
use oscwalk::pmf::LatticePmf;
use oscwalk::renewal::Convention;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Step law on the negative half-line, as `[site, probability]` pairs.
    pub mu: Vec<(i64, f64)>,
    /// Step law on the positive half-line.
    pub mu_prime: Vec<(i64, f64)>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub start: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// 0 = let the thread pool decide.
    #[serde(default)]
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "default_window")]
    pub window_m: i64,
    #[serde(default = "default_horizon")]
    pub horizon_n: usize,
    #[serde(default = "default_depth_tol")]
    pub depth_tol: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub convention: ConventionChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConventionChoice {
    /// Resolve against the +-1 oracle at startup.
    #[default]
    Auto,
    HalfOpen,
    Closed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_alpha() -> f64 {
    0.5
}
fn default_n() -> usize {
    5000
}
fn default_paths() -> usize {
    200_000
}
fn default_times() -> Vec<f64> {
    vec![0.5, 1.0]
}
fn default_seed() -> u64 {
    1
}
fn default_window() -> i64 {
    64
}
fn default_horizon() -> usize {
    4096
}
fn default_depth_tol() -> f64 {
    1e-12
}
fn default_delta() -> f64 {
    0.5
}
fn default_dir() -> String {
    "out".into()
}
fn default_formats() -> Vec<String> {
    vec!["json".into(), "csv".into()]
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}
impl Default for NumericsConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}
impl Default for OutputConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.model.alpha) {
            bail!("model.alpha must lie in [0, 1]");
        }
        if self.run.n == 0 {
            bail!("run.n must be positive");
        }
        if self.numerics.window_m < 1 {
            bail!("numerics.window_m must be >= 1");
        }
        if !(self.numerics.depth_tol > 0.0 && self.numerics.depth_tol <= 1e-6) {
            bail!("numerics.depth_tol must lie in (0, 1e-6]");
        }
        if self.numerics.delta <= 0.0 {
            bail!("numerics.delta must be positive");
        }
        let mut sorted = self.run.times.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted != self.run.times || self.run.times.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            bail!("run.times must be increasing values in (0, 1]");
        }
        self.mu()?;
        self.mu_prime()?;
        Ok(())
    }

    pub fn mu(&self) -> Result<LatticePmf> {
        LatticePmf::new(&self.model.mu).context("model.mu")
    }

    pub fn mu_prime(&self) -> Result<LatticePmf> {
        LatticePmf::new(&self.model.mu_prime).context("model.mu_prime")
    }

    /// Convention used for renewal-function queries; `Auto` runs the
    /// resolution oracle.
    pub fn convention(&self) -> Result<Convention> {
        Ok(match self.numerics.convention {
            ConventionChoice::HalfOpen => Convention::HalfOpen,
            ConventionChoice::Closed => Convention::Closed,
            ConventionChoice::Auto => oscwalk::renewal::resolve_convention()?.resolved,
        })
    }

    /// Hash of the resolved science configuration (model, run, numerics;
    /// output routing does not change results and is excluded).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&(&self.model, &self.run, &self.numerics))
            .expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"model": {"mu": [[-1, 0.5], [1, 0.5]], "mu_prime": [[-1, 0.5], [1, 0.5]]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.run.n, 5000);
        assert_eq!(cfg.numerics.window_m, 64);
        assert_eq!(cfg.numerics.convention, ConventionChoice::Auto);
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: Result<ExperimentConfig, _> = serde_json::from_str(
            r#"{"model": {"mu": [[-1, 1.0]], "mu_prime": [[1, 1.0]], "extra": 3}}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let base = r#"{"model": {"mu": [[-1, 0.5], [1, 0.5]], "mu_prime": [[-1, 0.5], [1, 0.5]]}}"#;
        let a: ExperimentConfig = serde_json::from_str(base).unwrap();
        let b: ExperimentConfig = serde_json::from_str(base).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.run.seed = 2;
        assert_ne!(a.hash(), c.hash());
    }
}
