//! Label-noise injection, noise-taxonomy audits, and the loss-ablation
//! grid over the toy trainer.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use serde::{Deserialize, Serialize};

use crate::losses::{LossConfig, LossKind};
use crate::mock::splitmix64;
use crate::toy::{gaussian_blobs, train_toy, ToyError};

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseError {
    BadRate(f64),
    TooFewClasses,
    UnknownTag(String),
    Toy(ToyError),
}

impl fmt::Display for NoiseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseError::BadRate(r) => write!(f, "noise rate {r} outside [0, 1]"),
            NoiseError::TooFewClasses => write!(f, "need at least 2 classes to flip labels"),
            NoiseError::UnknownTag(t) => write!(f, "unknown noise tag {t:?}"),
            NoiseError::Toy(e) => write!(f, "{e}"),
        }
    }
}

impl From<ToyError> for NoiseError {
    fn from(e: ToyError) -> Self {
        NoiseError::Toy(e)
    }
}

/// Symmetric uniform-flip noise: exactly floor(rate * n) labels flipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub rate: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(rate: f64, seed: u64) -> Result<Self, NoiseError> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(NoiseError::BadRate(rate));
        }
        Ok(NoiseSpec { rate, seed })
    }
}

/// Flip exactly floor(rate * n) labels, chosen without replacement,
/// each replaced uniformly among the other classes. Returns the noisy
/// labels and the sorted flipped index set.
pub fn inject_label_noise(
    labels: &[usize],
    classes: usize,
    spec: NoiseSpec,
) -> Result<(Vec<usize>, Vec<usize>), NoiseError> {
    let n = labels.len();
    let n_flip = (spec.rate * n as f64) as usize;
    if n_flip > 0 && classes < 2 {
        return Err(NoiseError::TooFewClasses);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // partial Fisher-Yates over indices
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..n_flip {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    let mut flipped: Vec<usize> = indices[..n_flip].to_vec();
    flipped.sort_unstable();
    let mut noisy = labels.to_vec();
    for &idx in &flipped {
        let offset = rng.gen_range(1..classes);
        noisy[idx] = (labels[idx] + offset) % classes;
    }
    Ok((noisy, flipped))
}

/// The five observed noise categories plus an explicit clean tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseTag {
    Label,
    Image,
    Question,
    ImageQuestionMismatch,
    Ambiguous,
    Clean,
}

impl NoiseTag {
    pub fn parse(s: &str) -> Result<Self, NoiseError> {
        Ok(match s {
            "label" => NoiseTag::Label,
            "image" => NoiseTag::Image,
            "question" => NoiseTag::Question,
            "image-question mismatch" | "image-question-mismatch" => {
                NoiseTag::ImageQuestionMismatch
            }
            "ambiguous" => NoiseTag::Ambiguous,
            "clean" => NoiseTag::Clean,
            other => return Err(NoiseError::UnknownTag(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseTag::Label => "label",
            NoiseTag::Image => "image",
            NoiseTag::Question => "question",
            NoiseTag::ImageQuestionMismatch => "image-question mismatch",
            NoiseTag::Ambiguous => "ambiguous",
            NoiseTag::Clean => "clean",
        }
    }
}

/// Category histogram over a manually tagged sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseAudit {
    pub label: usize,
    pub image: usize,
    pub question: usize,
    pub image_question_mismatch: usize,
    pub ambiguous: usize,
    pub sample_size: usize,
}

impl NoiseAudit {
    pub fn noisy_total(&self) -> usize {
        self.label + self.image + self.question + self.image_question_mismatch + self.ambiguous
    }
}

/// Build the category histogram from tag strings; unknown tags error.
pub fn audit_summary(tags: &[&str]) -> Result<NoiseAudit, NoiseError> {
    let mut audit = NoiseAudit { sample_size: tags.len(), ..Default::default() };
    for &t in tags {
        match NoiseTag::parse(t)? {
            NoiseTag::Label => audit.label += 1,
            NoiseTag::Image => audit.image += 1,
            NoiseTag::Question => audit.question += 1,
            NoiseTag::ImageQuestionMismatch => audit.image_question_mismatch += 1,
            NoiseTag::Ambiguous => audit.ambiguous += 1,
            NoiseTag::Clean => {}
        }
    }
    Ok(audit)
}

/// Toy-experiment shape shared by every ablation cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub sigma: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            classes: 3,
            train_per_class: 200,
            test_per_class: 200,
            sigma: 0.7,
            epochs: 200,
            lr: 0.1,
        }
    }
}

/// One grid cell result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub loss_kind: String,
    pub noise_rate: f64,
    pub seed: u64,
    pub test_acc: f64,
    pub final_train_loss: f64,
}

/// Run the loss x noise-rate x seed grid on the toy task. Each cell's
/// RNG derives from (master seed, cell index), so cells are independent
/// and the table is reproducible bit-for-bit.
pub fn ablation_grid(
    kinds: &[LossKind],
    rates: &[f64],
    seeds: &[u64],
    base: &LossConfig,
    cfg: &AblationConfig,
) -> Result<Vec<AblationRow>, NoiseError> {
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &kind in kinds {
        for &rate in rates {
            for &seed in seeds {
                let cell_seed = splitmix64(seed ^ splitmix64(cell));
                let train = gaussian_blobs(cfg.classes, cfg.train_per_class, cfg.sigma, cell_seed);
                let test =
                    gaussian_blobs(cfg.classes, cfg.test_per_class, cfg.sigma, splitmix64(cell_seed));
                let spec = NoiseSpec::new(rate, cell_seed ^ 0x4e6f_6973)?;
                let (noisy, _) = inject_label_noise(&train.labels, cfg.classes, spec)?;
                let mut noisy_train = train.clone();
                noisy_train.labels = noisy;
                let loss_cfg = LossConfig { kind, ..*base };
                let result = train_toy(&noisy_train, &test, &loss_cfg, cfg.epochs, cfg.lr, cell_seed)?;
                rows.push(AblationRow {
                    loss_kind: kind.to_string(),
                    noise_rate: rate,
                    seed,
                    test_acc: result.test_accuracy,
                    final_train_loss: *result.train_losses.last().unwrap_or(&0.0),
                });
                cell += 1;
            }
        }
    }
    Ok(rows)
}
