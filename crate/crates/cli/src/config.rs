//! Resolved run configuration: defaults, then the `--config` file, then the
//! scorer URL environment variable, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vasekit_core::advantage::DEFAULT_EPSILON;
use vasekit_core::filter::FilterConfig;
use vasekit_core::reward::RewardConfig;
use vasekit_core::similarity::DEFAULT_DIMENSION;
use vasekit_core::split::validate_ratios;
use vasekit_scorer::ScorerEndpointConfig;

use crate::io::usage;

pub const SCORER_URL_ENV: &str = "VASEKIT_SCORER_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    /// Built-in hashed bag-of-words embeddings.
    HashedBow,
    /// External embedding service.
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdvantageSettings {
    pub epsilon: f64,
}

impl Default for AdvantageSettings {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self { ratios: [0.7, 0.15, 0.15], seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub provider: ProviderKind,
    /// Bucket count of the built-in provider.
    pub embedding_dimension: usize,
    /// Replacement extraction lexicon; the built-in one is used when unset.
    pub lexicon: Option<PathBuf>,
    pub reward: RewardConfig,
    pub advantage: AdvantageSettings,
    pub filter: FilterConfig,
    pub split: SplitSettings,
    pub scorer: ScorerEndpointConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::HashedBow,
            embedding_dimension: DEFAULT_DIMENSION,
            lexicon: None,
            reward: RewardConfig::default(),
            advantage: AdvantageSettings::default(),
            filter: FilterConfig::default(),
            split: SplitSettings::default(),
            scorer: ScorerEndpointConfig::default(),
        }
    }
}

impl AppConfig {
    /// Defaults overlaid with the config file (if any) and the environment.
    pub fn load(path: Option<&Path>, scorer_url_env: Option<String>) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text =
                    fs::read_to_string(p).map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        if let Some(url) = scorer_url_env.filter(|u| !u.is_empty()) {
            cfg.scorer.base_url = url;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.reward.validate().map_err(|e| usage(format!("reward config: {e}")))?;
        self.filter.validate().map_err(|e| usage(format!("filter config: {e}")))?;
        validate_ratios(self.split.ratios).map_err(|e| usage(format!("split config: {e}")))?;
        self.scorer.validate().map_err(|e| usage(e.to_string()))?;
        if self.embedding_dimension == 0 {
            return Err(usage("embedding_dimension must be positive"));
        }
        if !(self.advantage.epsilon >= 0.0 && self.advantage.epsilon.is_finite()) {
            return Err(usage(format!("advantage epsilon must be non-negative, got {}", self.advantage.epsilon)));
        }
        Ok(())
    }

    pub fn to_pretty_json(&self) -> String {
        let mut shown = self.clone();
        if shown.scorer.bearer_token.is_some() {
            shown.scorer.bearer_token = Some("***".into());
        }
        serde_json::to_string_pretty(&shown).expect("config serializes")
    }

    /// SHA-256 over the compact JSON form, bearer token excluded.
    pub fn hash(&self) -> String {
        let mut hashed = self.clone();
        hashed.scorer.bearer_token = None;
        let json = serde_json::to_string(&hashed).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

pub fn read_env_url() -> Option<String> {
    std::env::var(SCORER_URL_ENV).ok()
}

pub fn load_lexicon(cfg: &AppConfig) -> anyhow::Result<vasekit_core::extract::Lexicon> {
    match &cfg.lexicon {
        Some(p) => vasekit_core::extract::Lexicon::load(p)
            .with_context(|| format!("lexicon {}", p.display()))
            .map_err(|e| usage(format!("{e:#}"))),
        None => Ok(vasekit_core::extract::Lexicon::default_greek()),
    }
}
