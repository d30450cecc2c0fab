//! JSON request/response bodies shared by the HTTP clients and the
//! mock server.

use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub dim: usize,
    pub values: Vec<f32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedTokensResponse {
    pub dim: usize,
    pub vectors: Vec<Vec<f32>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImageRequest {
    pub image_ref: String,
}

// /caption responses reuse `factrag_core::embed::VisualContext`
// directly; it already derives serde.

#[derive(Debug, Serialize, Deserialize)]
pub struct DetectResponse {
    pub objects: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExplainRequest {
    pub prompt: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExplainResponse {
    pub explanation: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub text: String,
    pub image_ref: String,
    pub options: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerResponse {
    pub label: String,
    pub scores: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}
