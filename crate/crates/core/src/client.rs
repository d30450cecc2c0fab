//! Capability contracts for the external neural services.
//!
//! One trait per capability; real HTTP-backed implementations live in
//! the companion crate, deterministic mocks in [`crate::mock`].

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::embed::{EmbedError, EmbeddingVector, TokenEmbeddings, VisualContext};

#[derive(Debug, Clone, PartialEq)]
pub enum ClientError {
    /// Service unreachable, timed out, or returned a malformed response.
    Transport(String),
    /// Response violated the contract (e.g. embedding dim drift).
    Contract(String),
    Embed(EmbedError),
    EmptyInput,
    NoOptions,
}

impl fmt::Display for ClientError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClientError::Transport(msg) => write!(f, "transport error: {msg}"),
            ClientError::Contract(msg) => write!(f, "contract error: {msg}"),
            ClientError::Embed(e) => write!(f, "{e}"),
            ClientError::EmptyInput => write!(f, "empty input"),
            ClientError::NoOptions => write!(f, "answer options must be non-empty"),
        }
    }
}

impl From<EmbedError> for ClientError {
    fn from(e: EmbedError) -> Self {
        ClientError::Embed(e)
    }
}

/// Text embedding service (single-vector and per-token).
pub trait Embedder {
    fn dim(&self) -> usize;
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ClientError>;
    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, ClientError>;
}

/// Image captioning service (traditional, dense, region captions and
/// scene-graph triplets).
pub trait Captioner {
    fn caption(&self, image_ref: &str) -> Result<VisualContext, ClientError>;
}

/// Object detection service.
pub trait Detector {
    fn detect_objects(&self, image_ref: &str) -> Result<Vec<String>, ClientError>;
}

/// LLM explanation generation service.
pub trait Explainer {
    fn explain(&self, prompt: &str) -> Result<String, ClientError>;
}

/// Answer prediction over a closed option set.
pub trait Answerer {
    fn answer(
        &self,
        text: &str,
        image_ref: &str,
        options: &[String],
    ) -> Result<(String, Vec<f64>), ClientError>;
}
