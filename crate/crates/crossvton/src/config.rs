//! Run configuration: TOML file, environment overrides, validation, and
//! a content fingerprint that gets stamped into every manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::zonealgebra::Round2Parenthesization;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn default_seed() -> u64 {
    7
}
fn default_workers() -> usize {
    1
}
fn default_failure_threshold() -> f64 {
    0.10
}
fn default_gen_margin() -> u32 {
    1
}
fn default_shrink_range() -> (f64, f64) {
    (0.15, 0.45)
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("crossvton-out")
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Abort threshold: fraction of records allowed to fail before the
    /// run itself is considered failed.
    #[serde(default = "default_failure_threshold")]
    pub failure_threshold: f64,
    /// Margin (pixels) added around the garment bounding box when the
    /// generation region is derived from the parsing map.
    #[serde(default = "default_gen_margin")]
    pub gen_margin: u32,
    #[serde(default = "default_shrink_range")]
    pub shrink_fraction_range: (f64, f64),
    #[serde(default)]
    pub round2_parenthesization: Round2Parenthesization,
    /// Stage gate: round-2 construction requires a try-on backend that
    /// went through round-1 training. Mock runs assert it explicitly.
    #[serde(default)]
    pub round1_trained: bool,
    /// Remote endpoint base URL; absent means mock backends.
    #[serde(default)]
    pub endpoint_base_url: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: default_seed(),
            output_dir: default_output_dir(),
            workers: default_workers(),
            failure_threshold: default_failure_threshold(),
            gen_margin: default_gen_margin(),
            shrink_fraction_range: default_shrink_range(),
            round2_parenthesization: Round2Parenthesization::default(),
            round1_trained: false,
            endpoint_base_url: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// `CROSSVTON_SEED`, `CROSSVTON_FAILURE_THRESHOLD`, and
    /// `CROSSVTON_ROUND1_TRAINED` override file values; endpoint
    /// variables are applied later by `BackendEndpoint`.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(seed) = std::env::var("CROSSVTON_SEED") {
            if let Ok(seed) = seed.parse() {
                self.seed = seed;
            }
        }
        if let Ok(t) = std::env::var("CROSSVTON_FAILURE_THRESHOLD") {
            if let Ok(t) = t.parse() {
                self.failure_threshold = t;
            }
        }
        if let Ok(v) = std::env::var("CROSSVTON_ROUND1_TRAINED") {
            self.round1_trained = v == "1" || v.eq_ignore_ascii_case("true");
        }
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.failure_threshold) {
            return Err(ConfigError::Invalid("failure_threshold must be in [0, 1]".into()));
        }
        let (lo, hi) = self.shrink_fraction_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(ConfigError::Invalid(
                "shrink_fraction_range must satisfy 0 < min <= max < 1".into(),
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical serialized config; stamped into
    /// manifests so a resumed run can refuse mismatched settings. The
    /// output directory is excluded — the same construction written to
    /// two places is the same construction.
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let canon = serde_json::to_vec(&canonical).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&canon);
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
