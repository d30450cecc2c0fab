//! Embedding vector types and the visual-context bundle.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum EmbedError {
    EmptyInput,
    ZeroVector,
    DimMismatch { expected: usize, got: usize },
}

impl fmt::Display for EmbedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbedError::EmptyInput => write!(f, "empty input"),
            EmbedError::ZeroVector => write!(f, "cannot normalize a zero vector"),
            EmbedError::DimMismatch { expected, got } => {
                write!(f, "embedding dim mismatch: expected {expected}, got {got}")
            }
        }
    }
}

/// A unit-norm dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    /// Normalize `values` to unit L2 norm.
    pub fn unit(values: Vec<f32>) -> Result<Self, EmbedError> {
        let norm = libm::sqrt(values.iter().map(|&v| v as f64 * v as f64).sum::<f64>());
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbedError::ZeroVector);
        }
        let values = values.into_iter().map(|v| (v as f64 / norm) as f32).collect();
        Ok(EmbeddingVector { values })
    }

    /// Wrap values that are already unit-norm (e.g. read from a snapshot).
    pub fn from_unit_values(values: Vec<f32>) -> Self {
        EmbeddingVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Dot product, accumulated in f64.
    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        dot_f64(&self.values, &other.values)
    }
}

pub(crate) fn dot_f64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Per-token embeddings aligned to a token list.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddings {
    vectors: Vec<EmbeddingVector>,
}

impl TokenEmbeddings {
    pub fn new(vectors: Vec<EmbeddingVector>) -> Result<Self, EmbedError> {
        if vectors.is_empty() {
            return Err(EmbedError::EmptyInput);
        }
        let dim = vectors[0].dim();
        for v in &vectors {
            if v.dim() != dim {
                return Err(EmbedError::DimMismatch { expected: dim, got: v.dim() });
            }
        }
        Ok(TokenEmbeddings { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn vectors(&self) -> &[EmbeddingVector] {
        &self.vectors
    }
}

/// Captions, detected objects, and scene-graph triplets for one image.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualContext {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traditional_caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense_caption: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub region_captions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scene_graph: Vec<(String, String, String)>,
}

impl VisualContext {
    pub fn is_empty(&self) -> bool {
        self.traditional_caption.is_none()
            && self.dense_caption.is_none()
            && self.region_captions.is_empty()
            && self.objects.is_empty()
            && self.scene_graph.is_empty()
    }
}
