//! Contrastive retriever tuning: pairwise softmax loss over MaxSim
//! relevance scores, uniform negative sampling, and gradient-descent
//! training of a linear projection head over a frozen embedder.
//!
//! Projected vectors are re-normalized to unit norm, so the head can
//! only reshape the embedding geometry, not inflate scores.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::client::{ClientError, Embedder};
use crate::corpus::Corpus;

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    NonPositiveLearningRate,
    NanScore,
    EmptyTriples,
    UnknownFact { id: String },
    CorpusTooSmall,
    Client(ClientError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::NonPositiveLearningRate => write!(f, "learning rate must be > 0"),
            TrainError::NanScore => write!(f, "relevance score is NaN"),
            TrainError::EmptyTriples => write!(f, "no training triples"),
            TrainError::UnknownFact { id } => write!(f, "triple references unknown fact {id}"),
            TrainError::CorpusTooSmall => {
                write!(f, "corpus must hold at least 2 facts to sample a negative")
            }
            TrainError::Client(e) => write!(f, "{e}"),
        }
    }
}

impl From<ClientError> for TrainError {
    fn from(e: ClientError) -> Self {
        TrainError::Client(e)
    }
}

/// A training triple: query, positive fact id, negative fact id.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Triple {
    pub q: String,
    pub d_plus: String,
    pub d_minus: String,
}

impl Triple {
    pub fn new(q: &str, d_plus: &str, d_minus: &str) -> Option<Self> {
        if d_plus == d_minus {
            return None;
        }
        Some(Triple { q: q.into(), d_plus: d_plus.into(), d_minus: d_minus.into() })
    }
}

/// Pairwise softmax cross-entropy over two relevance scores,
/// L = -log(exp(s+) / (exp(s+) + exp(s-))), computed via log-sum-exp.
pub fn contrastive_loss(s_plus: f64, s_minus: f64) -> Result<f64, TrainError> {
    if s_plus.is_nan() || s_minus.is_nan() {
        return Err(TrainError::NanScore);
    }
    let delta = s_plus - s_minus;
    Ok(if delta >= 0.0 { libm::log1p(libm::exp(-delta)) } else { -delta + libm::log1p(libm::exp(delta)) })
}

/// Analytic (dL/ds+, dL/ds-) of [`contrastive_loss`].
pub fn contrastive_loss_grad(s_plus: f64, s_minus: f64) -> (f64, f64) {
    let delta = s_plus - s_minus;
    // sigmoid(delta), stably
    let sig = if delta >= 0.0 {
        1.0 / (1.0 + libm::exp(-delta))
    } else {
        let e = libm::exp(delta);
        e / (1.0 + e)
    };
    (sig - 1.0, 1.0 - sig)
}

/// Uniformly sample a fact id other than `exclude`.
pub fn sample_negative<R: Rng>(
    corpus: &Corpus,
    exclude: &str,
    rng: &mut R,
) -> Result<String, TrainError> {
    let n = corpus.len();
    let exclude_idx = corpus.iter().position(|f| f.id == exclude);
    match exclude_idx {
        Some(skip) => {
            if n < 2 {
                return Err(TrainError::CorpusTooSmall);
            }
            let r = rng.gen_range(0..n - 1);
            let idx = if r >= skip { r + 1 } else { r };
            Ok(corpus.get(idx).unwrap().id.clone())
        }
        None => {
            if n == 0 {
                return Err(TrainError::CorpusTooSmall);
            }
            Ok(corpus.get(rng.gen_range(0..n)).unwrap().id.clone())
        }
    }
}

/// Per-token base embeddings of one text, in f64.
pub type TokenMatrix = Vec<Vec<f64>>;

/// A triple resolved to base token embeddings.
#[derive(Debug, Clone)]
pub struct TripleVecs {
    pub q: TokenMatrix,
    pub d_plus: TokenMatrix,
    pub d_minus: TokenMatrix,
}

/// Linear map applied to base embeddings, output re-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    out_dim: usize,
    in_dim: usize,
    /// Row-major out_dim x in_dim.
    weights: Vec<f64>,
}

impl ProjectionHead {
    pub fn identity(dim: usize) -> Self {
        let mut weights = alloc::vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        ProjectionHead { out_dim: dim, in_dim: dim, weights }
    }

    pub fn from_weights(out_dim: usize, in_dim: usize, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), out_dim * in_dim);
        ProjectionHead { out_dim, in_dim, weights }
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// W x, without normalization.
    fn apply_raw(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|i| {
                let row = &self.weights[i * self.in_dim..(i + 1) * self.in_dim];
                row.iter().zip(x).map(|(w, v)| w * v).sum()
            })
            .collect()
    }
}

struct Projected {
    raw_norm: f64,
    unit: Vec<f64>,
}

fn project(head: &ProjectionHead, tokens: &TokenMatrix) -> Vec<Projected> {
    tokens
        .iter()
        .map(|t| {
            let raw = head.apply_raw(t);
            let norm = libm::sqrt(raw.iter().map(|v| v * v).sum::<f64>());
            let unit = if norm > 0.0 {
                raw.iter().map(|v| v / norm).collect()
            } else {
                raw.clone()
            };
            Projected { raw_norm: norm, unit }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// MaxSim over head-projected, re-normalized token embeddings.
pub fn projected_maxsim(head: &ProjectionHead, q: &TokenMatrix, d: &TokenMatrix) -> f64 {
    let qp = project(head, q);
    let dp = project(head, d);
    maxsim_projected(&qp, &dp).0
}

/// Returns (score, per-query-token argmax document index).
fn maxsim_projected(q: &[Projected], d: &[Projected]) -> (f64, Vec<usize>) {
    let mut total = 0.0;
    let mut arg = Vec::with_capacity(q.len());
    for qi in q {
        let (best_j, best) = d
            .iter()
            .enumerate()
            .map(|(j, dj)| (j, dot(&qi.unit, &dj.unit)))
            .fold((0usize, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        total += best;
        arg.push(best_j);
    }
    (total, arg)
}

/// d(u_hat . v_hat)/dW contribution for one matched token pair, scaled
/// by `g`, accumulated into `grad`. `a` and `b` are the base vectors.
fn accumulate_pair_grad(
    grad: &mut [f64],
    head: &ProjectionHead,
    g: f64,
    a: &[f64],
    u: &Projected,
    b: &[f64],
    v: &Projected,
) {
    let uv = dot(&u.unit, &v.unit);
    let in_dim = head.in_dim;
    for i in 0..head.out_dim {
        // (I - u u^T) v / |Wa|  paired with a^T, and symmetrically for b
        let gu = (v.unit[i] - uv * u.unit[i]) / u.raw_norm;
        let gv = (u.unit[i] - uv * v.unit[i]) / v.raw_norm;
        let row = &mut grad[i * in_dim..(i + 1) * in_dim];
        for (k, r) in row.iter_mut().enumerate() {
            *r += g * (gu * a[k] + gv * b[k]);
        }
    }
}

/// Mean contrastive loss and its gradient w.r.t. the head weights over
/// a batch of embedded triples.
pub fn triple_batch_loss_grad(
    head: &ProjectionHead,
    batch: &[TripleVecs],
) -> Result<(f64, Vec<f64>), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyTriples);
    }
    let mut grad = alloc::vec![0.0; head.weights.len()];
    let mut loss_sum = 0.0;
    for t in batch {
        let qp = project(head, &t.q);
        let pp = project(head, &t.d_plus);
        let np = project(head, &t.d_minus);
        let (s_plus, arg_plus) = maxsim_projected(&qp, &pp);
        let (s_minus, arg_minus) = maxsim_projected(&qp, &np);
        loss_sum += contrastive_loss(s_plus, s_minus)?;
        let (g_plus, g_minus) = contrastive_loss_grad(s_plus, s_minus);
        for (i, &j) in arg_plus.iter().enumerate() {
            accumulate_pair_grad(&mut grad, head, g_plus, &t.q[i], &qp[i], &t.d_plus[j], &pp[j]);
        }
        for (i, &j) in arg_minus.iter().enumerate() {
            accumulate_pair_grad(&mut grad, head, g_minus, &t.q[i], &qp[i], &t.d_minus[j], &np[j]);
        }
    }
    let n = batch.len() as f64;
    for g in &mut grad {
        *g /= n;
    }
    Ok((loss_sum / n, grad))
}

/// Embed a text into f64 token vectors via the client.
pub fn embed_tokens_f64(embedder: &dyn Embedder, text: &str) -> Result<TokenMatrix, ClientError> {
    let toks = embedder.embed_tokens(text)?;
    Ok(toks
        .vectors()
        .iter()
        .map(|v| v.values().iter().map(|&x| x as f64).collect())
        .collect())
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { epochs: 20, lr: 0.5, batch_size: 32 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedHead {
    pub head: ProjectionHead,
    pub epoch_losses: Vec<f64>,
}

/// Minimize the mean pairwise loss over projected MaxSim scores with
/// full-epoch mini-batch gradient descent. Zero epochs returns the
/// head unchanged.
pub fn train_projection(
    corpus: &Corpus,
    triples: &[Triple],
    embedder: &dyn Embedder,
    head: ProjectionHead,
    opts: TrainOptions,
) -> Result<TrainedHead, TrainError> {
    if opts.lr <= 0.0 {
        return Err(TrainError::NonPositiveLearningRate);
    }
    if triples.is_empty() {
        return Err(TrainError::EmptyTriples);
    }
    let batch_size = opts.batch_size.max(1);
    let resolved: Vec<TripleVecs> = triples
        .iter()
        .map(|t| {
            let fact = |id: &str| {
                corpus.by_id(id).ok_or_else(|| TrainError::UnknownFact { id: id.into() })
            };
            Ok(TripleVecs {
                q: embed_tokens_f64(embedder, &t.q)?,
                d_plus: embed_tokens_f64(embedder, &fact(&t.d_plus)?.text)?,
                d_minus: embed_tokens_f64(embedder, &fact(&t.d_minus)?.text)?,
            })
        })
        .collect::<Result<_, TrainError>>()?;
    let mut head = head;
    let mut epoch_losses = Vec::with_capacity(opts.epochs);
    for _ in 0..opts.epochs {
        let mut loss_sum = 0.0;
        let mut batches = 0.0;
        for chunk in resolved.chunks(batch_size) {
            let (loss, grad) = triple_batch_loss_grad(&head, chunk)?;
            for (w, g) in head.weights.iter_mut().zip(&grad) {
                *w -= opts.lr * g;
            }
            loss_sum += loss;
            batches += 1.0;
        }
        epoch_losses.push(loss_sum / batches);
    }
    Ok(TrainedHead { head, epoch_losses })
}
