//! HTTP-backed implementations of the core capability traits, plus a
//! bundle type that resolves each capability to either a remote
//! endpoint or the built-in deterministic mock.

use std::sync::Arc;

use factrag_core::client::{Answerer, Captioner, ClientError, Detector, Embedder, Explainer};
use factrag_core::embed::{EmbeddingVector, TokenEmbeddings, VisualContext};
use factrag_core::mock::{MockAnswerer, MockCaptioner, MockDetector, MockEmbedder, MockExplainer};

use crate::config::PipelineConfig;
use crate::http::{post_json, HttpOptions};
use crate::wire::*;

fn transport(e: anyhow::Error) -> ClientError {
    ClientError::Transport(format!("{e:#}"))
}

pub struct HttpEmbedder {
    pub base: String,
    pub dim: usize,
    pub opts: HttpOptions,
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ClientError> {
        let resp: EmbedResponse = post_json(
            &self.base,
            "/embed",
            &EmbedRequest { text: text.to_string() },
            &self.opts,
        )
        .map_err(transport)?;
        if resp.dim != self.dim || resp.values.len() != self.dim {
            return Err(ClientError::Contract(format!(
                "embed dim drift: expected {}, got {}",
                self.dim, resp.dim
            )));
        }
        Ok(EmbeddingVector::from_unit_values(resp.values))
    }

    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, ClientError> {
        let resp: EmbedTokensResponse = post_json(
            &self.base,
            "/embed_tokens",
            &EmbedRequest { text: text.to_string() },
            &self.opts,
        )
        .map_err(transport)?;
        if resp.dim != self.dim {
            return Err(ClientError::Contract(format!(
                "embed_tokens dim drift: expected {}, got {}",
                self.dim, resp.dim
            )));
        }
        let vectors: Vec<EmbeddingVector> = resp
            .vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dim {
                    Err(ClientError::Contract(format!(
                        "token vector has {} values, expected {}",
                        v.len(),
                        self.dim
                    )))
                } else {
                    Ok(EmbeddingVector::from_unit_values(v))
                }
            })
            .collect::<Result<_, _>>()?;
        TokenEmbeddings::new(vectors).map_err(ClientError::Embed)
    }
}

pub struct HttpCaptioner {
    pub base: String,
    pub opts: HttpOptions,
}

impl Captioner for HttpCaptioner {
    fn caption(&self, image_ref: &str) -> Result<VisualContext, ClientError> {
        post_json(
            &self.base,
            "/caption",
            &ImageRequest { image_ref: image_ref.to_string() },
            &self.opts,
        )
        .map_err(transport)
    }
}

pub struct HttpDetector {
    pub base: String,
    pub opts: HttpOptions,
}

impl Detector for HttpDetector {
    fn detect_objects(&self, image_ref: &str) -> Result<Vec<String>, ClientError> {
        let resp: DetectResponse = post_json(
            &self.base,
            "/detect",
            &ImageRequest { image_ref: image_ref.to_string() },
            &self.opts,
        )
        .map_err(transport)?;
        Ok(resp.objects)
    }
}

pub struct HttpExplainer {
    pub base: String,
    pub opts: HttpOptions,
}

impl Explainer for HttpExplainer {
    fn explain(&self, prompt: &str) -> Result<String, ClientError> {
        let resp: ExplainResponse = post_json(
            &self.base,
            "/explain",
            &ExplainRequest { prompt: prompt.to_string() },
            &self.opts,
        )
        .map_err(transport)?;
        Ok(resp.explanation)
    }
}

pub struct HttpAnswerer {
    pub base: String,
    pub opts: HttpOptions,
}

impl Answerer for HttpAnswerer {
    fn answer(
        &self,
        text: &str,
        image_ref: &str,
        options: &[String],
    ) -> Result<(String, Vec<f64>), ClientError> {
        let resp: AnswerResponse = post_json(
            &self.base,
            "/answer",
            &AnswerRequest {
                text: text.to_string(),
                image_ref: image_ref.to_string(),
                options: options.to_vec(),
            },
            &self.opts,
        )
        .map_err(transport)?;
        if resp.scores.len() != options.len() {
            return Err(ClientError::Contract(format!(
                "answer returned {} scores for {} options",
                resp.scores.len(),
                options.len()
            )));
        }
        Ok((resp.label, resp.scores))
    }
}

/// Every capability the pipeline needs, each one mock or remote.
#[derive(Clone)]
pub struct ClientSet {
    pub embedder: Arc<dyn Embedder + Send + Sync>,
    pub captioner: Arc<dyn Captioner + Send + Sync>,
    pub detector: Arc<dyn Detector + Send + Sync>,
    pub explainer: Arc<dyn Explainer + Send + Sync>,
    pub answerer: Arc<dyn Answerer + Send + Sync>,
}

impl ClientSet {
    /// Resolve endpoints from the config (after env overrides); any
    /// capability without a URL falls back to its seeded mock.
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        let opts = HttpOptions {
            timeout: std::time::Duration::from_secs(cfg.client.timeout_secs),
            retries: cfg.client.retries,
        };
        let embedder: Arc<dyn Embedder + Send + Sync> = match &cfg.endpoints.embed {
            Some(base) => {
                Arc::new(HttpEmbedder { base: base.clone(), dim: cfg.dim, opts: opts.clone() })
            }
            None => Arc::new(MockEmbedder::new(cfg.seed, cfg.dim)),
        };
        let captioner: Arc<dyn Captioner + Send + Sync> = match &cfg.endpoints.caption {
            Some(base) => Arc::new(HttpCaptioner { base: base.clone(), opts: opts.clone() }),
            None => Arc::new(MockCaptioner::new(cfg.seed)),
        };
        let detector: Arc<dyn Detector + Send + Sync> = match &cfg.endpoints.detect {
            Some(base) => Arc::new(HttpDetector { base: base.clone(), opts: opts.clone() }),
            None => Arc::new(MockDetector::new(cfg.seed)),
        };
        let explainer: Arc<dyn Explainer + Send + Sync> = match &cfg.endpoints.explain {
            Some(base) => Arc::new(HttpExplainer { base: base.clone(), opts: opts.clone() }),
            None => Arc::new(MockExplainer),
        };
        let answerer: Arc<dyn Answerer + Send + Sync> = match &cfg.endpoints.answer {
            Some(base) => Arc::new(HttpAnswerer { base: base.clone(), opts }),
            None => Arc::new(MockAnswerer::new(cfg.seed)),
        };
        ClientSet { embedder, captioner, detector, explainer, answerer }
    }
}
