//! Deterministic mock clients.
//!
//! Every mock is a pure function of its inputs and a seed: two
//! processes with the same seed produce identical outputs, which is
//! what the end-to-end determinism tests rely on.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::client::{Answerer, Captioner, ClientError, Detector, Embedder, Explainer};
use crate::embed::{EmbeddingVector, TokenEmbeddings, VisualContext};
use crate::tokenize::tokenize;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Bag-of-tokens embedder: each token maps to a seeded-hash unit vector,
/// a text embeds to the normalized sum of its token vectors. Identical
/// text gives identical vectors and token overlap correlates scores.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    seed: u64,
    dim: usize,
}

impl MockEmbedder {
    pub fn new(seed: u64, dim: usize) -> Self {
        assert!(dim > 0, "embedding dim must be positive");
        MockEmbedder { seed, dim }
    }

    fn token_vector(&self, token: &str) -> EmbeddingVector {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(fnv1a(token.as_bytes()) ^ self.seed));
        let values: Vec<f32> = (0..self.dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        EmbeddingVector::unit(values).expect("uniform draw is nonzero")
    }
}

impl Embedder for MockEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ClientError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(ClientError::EmptyInput);
        }
        let mut sum = alloc::vec![0.0f32; self.dim];
        for tok in &tokens {
            for (s, v) in sum.iter_mut().zip(self.token_vector(tok).values()) {
                *s += v;
            }
        }
        Ok(EmbeddingVector::unit(sum)?)
    }

    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, ClientError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(ClientError::EmptyInput);
        }
        let vectors = tokens.iter().map(|t| self.token_vector(t)).collect();
        Ok(TokenEmbeddings::new(vectors)?)
    }
}

const SCENE_OBJECTS: &[&str] = &[
    "dog", "ball", "tree", "car", "bicycle", "cup", "table", "bird", "boat", "lamp", "chair",
    "book", "window", "flower", "cat", "horse",
];

const SCENE_PLACES: &[&str] =
    &["park", "street", "kitchen", "beach", "garden", "harbor", "field", "room"];

const SCENE_RELATIONS: &[&str] = &["near", "on", "under", "beside", "behind"];

fn scene_rng(seed: u64, image_ref: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(fnv1a(image_ref.as_bytes()) ^ seed))
}

fn scene_parts(seed: u64, image_ref: &str) -> (String, String, String, String) {
    let mut rng = scene_rng(seed, image_ref);
    let a = SCENE_OBJECTS[rng.gen_range(0..SCENE_OBJECTS.len())];
    let mut b = SCENE_OBJECTS[rng.gen_range(0..SCENE_OBJECTS.len())];
    while b == a {
        b = SCENE_OBJECTS[rng.gen_range(0..SCENE_OBJECTS.len())];
    }
    let place = SCENE_PLACES[rng.gen_range(0..SCENE_PLACES.len())];
    let rel = SCENE_RELATIONS[rng.gen_range(0..SCENE_RELATIONS.len())];
    (a.to_string(), b.to_string(), place.to_string(), rel.to_string())
}

/// Templated captioner keyed on the image reference.
#[derive(Debug, Clone)]
pub struct MockCaptioner {
    seed: u64,
}

impl MockCaptioner {
    pub fn new(seed: u64) -> Self {
        MockCaptioner { seed }
    }
}

impl Captioner for MockCaptioner {
    fn caption(&self, image_ref: &str) -> Result<VisualContext, ClientError> {
        let (a, b, place, rel) = scene_parts(self.seed, image_ref);
        Ok(VisualContext {
            traditional_caption: Some(format!("a photo of a {a} and a {b}")),
            dense_caption: Some(format!("a {a} {rel} a {b} in the {place}")),
            region_captions: alloc::vec![
                format!("a {a} on the left"),
                format!("a {b} on the right"),
            ],
            objects: alloc::vec![a.clone(), b.clone()],
            scene_graph: alloc::vec![(a, rel, b)],
        })
    }
}

/// Object detector that agrees with [`MockCaptioner`] on the same seed.
#[derive(Debug, Clone)]
pub struct MockDetector {
    seed: u64,
}

impl MockDetector {
    pub fn new(seed: u64) -> Self {
        MockDetector { seed }
    }
}

impl Detector for MockDetector {
    fn detect_objects(&self, image_ref: &str) -> Result<Vec<String>, ClientError> {
        let (a, b, _, _) = scene_parts(self.seed, image_ref);
        Ok(alloc::vec![a, b])
    }
}

fn prompt_line<'a>(prompt: &'a str, label: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(label))
}

/// Explainer that echoes the dense-caption and object content of the
/// prompt into a fixed single-line template. The template contains no
/// forbidden word.
#[derive(Debug, Clone)]
pub struct MockExplainer;

impl Explainer for MockExplainer {
    fn explain(&self, prompt: &str) -> Result<String, ClientError> {
        if prompt.trim().is_empty() {
            return Err(ClientError::EmptyInput);
        }
        let objects = prompt_line(prompt, "Objects (O): ").unwrap_or("the scene");
        let dense = prompt_line(prompt, "Dense Caption (DC): ").unwrap_or("the depicted setting");
        let question = prompt_line(prompt, "Question (Q): ").unwrap_or("the question");
        Ok(format!(
            "Seeing {objects} where {dense}, commonsense suggests the answer to {question} follows directly"
        ))
    }
}

/// Scorer over a closed option set. An option that appears verbatim
/// (case-insensitive) in the input text gets a dominant score; the
/// remainder is seeded hash noise, so outputs stay deterministic.
#[derive(Debug, Clone)]
pub struct MockAnswerer {
    seed: u64,
}

impl MockAnswerer {
    pub fn new(seed: u64) -> Self {
        MockAnswerer { seed }
    }
}

impl Answerer for MockAnswerer {
    fn answer(
        &self,
        text: &str,
        image_ref: &str,
        options: &[String],
    ) -> Result<(String, Vec<f64>), ClientError> {
        if options.is_empty() {
            return Err(ClientError::NoOptions);
        }
        if options.len() == 1 {
            return Ok((options[0].clone(), alloc::vec![1.0]));
        }
        let lower = text.to_lowercase();
        let scores: Vec<f64> = options
            .iter()
            .map(|opt| {
                let h = splitmix64(
                    fnv1a(text.as_bytes())
                        ^ fnv1a(image_ref.as_bytes()).rotate_left(17)
                        ^ fnv1a(opt.as_bytes()).rotate_left(31)
                        ^ self.seed,
                );
                let noise = (h >> 11) as f64 / (1u64 << 53) as f64;
                let hit = if lower.contains(&opt.to_lowercase()) { 1.0 } else { 0.0 };
                hit + 0.5 * noise
            })
            .collect();
        let best = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap();
        Ok((options[best].clone(), scores))
    }
}
