//! Desk-scale noise experiments: a seeded Gaussian-blob generator and
//! a full-batch linear softmax classifier trained with any of the
//! robust losses (CE warmup honored).

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::losses::{loss_for_epoch, loss_gradient, softmax, LogitsBatch, LossConfig, LossError};

#[derive(Debug, Clone, PartialEq)]
pub enum ToyError {
    NonPositiveLearningRate,
    Loss(LossError),
    ShapeMismatch,
}

impl fmt::Display for ToyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ToyError::NonPositiveLearningRate => write!(f, "learning rate must be > 0"),
            ToyError::Loss(e) => write!(f, "{e}"),
            ToyError::ShapeMismatch => write!(f, "features/labels shape mismatch"),
        }
    }
}

impl From<LossError> for ToyError {
    fn from(e: LossError) -> Self {
        ToyError::Loss(e)
    }
}

/// A labelled 2-D dataset, features row-major n x dim.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub dim: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Well-separated 2-D Gaussian blobs, one per class, `n_per_class`
/// points each. Deterministic per seed.
pub fn gaussian_blobs(classes: usize, n_per_class: usize, sigma: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(classes * n_per_class * 2);
    let mut labels = Vec::with_capacity(classes * n_per_class);
    let radius = 5.0;
    for c in 0..classes {
        let angle = 2.0 * core::f64::consts::PI * c as f64 / classes as f64;
        let (cx, cy) = (radius * libm::cos(angle), radius * libm::sin(angle));
        for _ in 0..n_per_class {
            features.push(cx + sigma * gaussian(&mut rng));
            features.push(cy + sigma * gaussian(&mut rng));
            labels.push(c);
        }
    }
    Dataset { features, labels, dim: 2, classes }
}

/// Linear softmax classifier weights: classes x (dim + 1), last column
/// is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub weights: Vec<f64>,
    pub dim: usize,
    pub classes: usize,
}

impl ToyModel {
    fn init(dim: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_5A5A);
        let weights = (0..classes * (dim + 1)).map(|_| 0.01 * gaussian(&mut rng)).collect();
        ToyModel { weights, dim, classes }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                let row = &self.weights[c * (self.dim + 1)..(c + 1) * (self.dim + 1)];
                row[..self.dim].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + row[self.dim]
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let p = softmax(&self.logits(x));
        p.iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap()
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = (0..data.len())
            .filter(|&i| self.predict(&data.features[i * data.dim..(i + 1) * data.dim]) == data.labels[i])
            .count();
        hits as f64 / data.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct ToyResult {
    pub model: ToyModel,
    pub train_losses: Vec<f64>,
    pub test_accuracy: f64,
}

/// Full-batch gradient descent on the linear classifier under the
/// configured loss with CE warmup. Deterministic per seed.
pub fn train_toy(
    train: &Dataset,
    test: &Dataset,
    cfg: &LossConfig,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<ToyResult, ToyError> {
    if lr <= 0.0 {
        return Err(ToyError::NonPositiveLearningRate);
    }
    cfg.validate()?;
    if train.features.len() != train.len() * train.dim {
        return Err(ToyError::ShapeMismatch);
    }
    if let Some(&bad) = train.labels.iter().find(|&&l| l >= train.classes) {
        return Err(ToyError::Loss(LossError::LabelOutOfRange {
            label: bad,
            classes: train.classes,
        }));
    }
    let mut model = ToyModel::init(train.dim, train.classes, seed);
    let n = train.len();
    let c = train.classes;
    let d = train.dim;
    let mut train_losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let kind = loss_for_epoch(epoch, cfg);
        let mut logits = Vec::with_capacity(n * c);
        for i in 0..n {
            logits.extend(model.logits(&train.features[i * d..(i + 1) * d]));
        }
        let batch = LogitsBatch::new(logits, train.labels.clone(), c)?;
        train_losses.push(crate::losses::batch_loss(kind, &batch, cfg));
        let grad = loss_gradient(kind, &batch, cfg); // n x c, mean-reduced
        for (i, x) in (0..n).map(|i| (i, &train.features[i * d..(i + 1) * d])) {
            for cls in 0..c {
                let g = grad[i * c + cls];
                let row = &mut model.weights[cls * (d + 1)..(cls + 1) * (d + 1)];
                for k in 0..d {
                    row[k] -= lr * g * x[k];
                }
                row[d] -= lr * g;
            }
        }
    }
    let test_accuracy = model.accuracy(test);
    Ok(ToyResult { model, train_losses, test_accuracy })
}
