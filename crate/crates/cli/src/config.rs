//! Pipeline configuration: a TOML file with every knob, environment
//! overrides for the service base URLs, and validation that names the
//! offending key.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use factrag_core::losses::LossConfig;
use factrag_core::prompt::PromptKind;
use factrag_core::retrieval::{IndexMode, QueryVariant};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Master seed; every derived RNG folds this in.
    pub seed: u64,
    /// Embedding dimensionality the clients must honour.
    pub dim: usize,
    /// Dataset tag carried through prompts and filtering.
    pub dataset: String,
    /// Worker threads for record-level parallelism.
    pub workers: usize,
    pub retrieval: RetrievalConfig,
    pub prompt: PromptConfig,
    pub loss: LossConfig,
    pub endpoints: Endpoints,
    pub client: ClientConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalConfig {
    pub mode: IndexMode,
    pub k: usize,
    pub query_variant: QueryVariant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptConfig {
    pub kind: PromptKind,
    pub token_budget: usize,
}

/// Base URLs per capability; `None` selects the built-in mock.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Endpoints {
    pub embed: Option<String>,
    pub caption: Option<String>,
    pub detect: Option<String>,
    pub explain: Option<String>,
    pub answer: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClientConfig {
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            dim: 32,
            dataset: "CRIC".to_string(),
            workers: 1,
            retrieval: RetrievalConfig::default(),
            prompt: PromptConfig::default(),
            loss: LossConfig::default(),
            endpoints: Endpoints::default(),
            client: ClientConfig::default(),
        }
    }
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig { mode: IndexMode::Single, k: 5, query_variant: QueryVariant::Q }
    }
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            kind: PromptKind::Type5,
            token_budget: factrag_core::integrate::DEFAULT_TOKEN_BUDGET,
        }
    }
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig { timeout_secs: crate::http::DEFAULT_TIMEOUT_SECS, retries: 0 }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("read config {}", path.display()))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("parse config {}", path.display()))?;
        cfg.apply_env_overrides();
        cfg.validate()?;
        Ok(cfg)
    }

    /// FACTRAG_EMBED_URL and friends override the config file.
    pub fn apply_env_overrides(&mut self) {
        let slots: [(&str, &mut Option<String>); 5] = [
            ("FACTRAG_EMBED_URL", &mut self.endpoints.embed),
            ("FACTRAG_CAPTION_URL", &mut self.endpoints.caption),
            ("FACTRAG_DETECT_URL", &mut self.endpoints.detect),
            ("FACTRAG_EXPLAIN_URL", &mut self.endpoints.explain),
            ("FACTRAG_ANSWER_URL", &mut self.endpoints.answer),
        ];
        for (var, slot) in slots {
            if let Ok(value) = std::env::var(var) {
                if !value.trim().is_empty() {
                    *slot = Some(value);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            bail!("dim must be positive");
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if self.retrieval.k == 0 {
            bail!("retrieval.k must be positive");
        }
        if self.prompt.token_budget == 0 {
            bail!("prompt.token_budget must be positive");
        }
        if self.client.timeout_secs == 0 {
            bail!("client.timeout_secs must be positive");
        }
        self.loss.validate().map_err(|e| anyhow::anyhow!("loss: {e}"))?;
        Ok(())
    }
}
