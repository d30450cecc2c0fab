//! Noise-robust classification losses and their analytic gradients.
//!
//! CE is the standard cross-entropy with a 1e-12 probability floor.
//! RCE is the reverse term gamma * (1 - p_y) (log 0 fixed at -gamma),
//! SCE = alpha * CE + beta * RCE, GCE = (1 - p_y^q) / q, and MIXED is
//! the convex mixture lambda * CE + (1 - lambda) * GCE. Training warms
//! up with vanilla CE before switching to the configured loss.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Probability floor inside logarithms.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum LossError {
    BadConfig(&'static str),
    LabelOutOfRange { label: usize, classes: usize },
    NonFiniteLogit,
}

impl fmt::Display for LossError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossError::BadConfig(msg) => write!(f, "invalid loss config: {msg}"),
            LossError::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            LossError::NonFiniteLogit => write!(f, "logits must be finite"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LossKind {
    Ce,
    Sce,
    Gce,
    Mixed,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LossKind::Ce => "CE",
            LossKind::Sce => "SCE",
            LossKind::Gce => "GCE",
            LossKind::Mixed => "MIXED",
        };
        write!(f, "{s}")
    }
}

/// Loss hyperparameters governing the reader-training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub kind: LossKind,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub q: f64,
    pub lambda: f64,
    pub warmup_epochs: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            kind: LossKind::Ce,
            alpha: 0.1,
            beta: 1.0,
            gamma: 4.0,
            q: 0.7,
            lambda: 0.4,
            warmup_epochs: 2,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(LossError::BadConfig("q must satisfy 0 < q <= 1"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(LossError::BadConfig("lambda must be in [0, 1]"));
        }
        if self.gamma <= 0.0 {
            return Err(LossError::BadConfig("gamma must be > 0"));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(LossError::BadConfig("alpha and beta must be >= 0"));
        }
        Ok(())
    }
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| libm::exp(v - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn p_of(p: &[f64], y: usize) -> f64 {
    p[y].max(PROB_EPS)
}

/// Cross-entropy, -log p_y with the documented floor.
pub fn ce(p: &[f64], y: usize) -> f64 {
    -libm::log(p_of(p, y))
}

/// Reverse cross-entropy, gamma * (1 - p_y).
pub fn rce(p: &[f64], y: usize, gamma: f64) -> f64 {
    gamma * (1.0 - p[y])
}

/// Symmetric cross-entropy, alpha * CE + beta * RCE.
pub fn sce(p: &[f64], y: usize, alpha: f64, beta: f64, gamma: f64) -> f64 {
    alpha * ce(p, y) + beta * rce(p, y, gamma)
}

/// Generalized cross-entropy, (1 - p_y^q) / q.
pub fn gce(p: &[f64], y: usize, q: f64) -> f64 {
    (1.0 - libm::pow(p_of(p, y), q)) / q
}

/// Convex mixture lambda * CE + (1 - lambda) * GCE.
pub fn mixed(p: &[f64], y: usize, lambda: f64, q: f64) -> f64 {
    lambda * ce(p, y) + (1.0 - lambda) * gce(p, y, q)
}

/// Per-example loss for `kind` under `cfg`.
pub fn loss_value(kind: LossKind, p: &[f64], y: usize, cfg: &LossConfig) -> f64 {
    match kind {
        LossKind::Ce => ce(p, y),
        LossKind::Sce => sce(p, y, cfg.alpha, cfg.beta, cfg.gamma),
        LossKind::Gce => gce(p, y, cfg.q),
        LossKind::Mixed => mixed(p, y, cfg.lambda, cfg.q),
    }
}

/// A batch of logits with integer labels.
#[derive(Debug, Clone)]
pub struct LogitsBatch {
    logits: Vec<f64>,
    labels: Vec<usize>,
    classes: usize,
}

impl LogitsBatch {
    pub fn new(logits: Vec<f64>, labels: Vec<usize>, classes: usize) -> Result<Self, LossError> {
        assert_eq!(logits.len(), labels.len() * classes, "logits shape mismatch");
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(LossError::NonFiniteLogit);
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(LossError::LabelOutOfRange { label: bad, classes });
        }
        Ok(LogitsBatch { logits, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.logits[i * self.classes..(i + 1) * self.classes]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }
}

/// Mean loss of `kind` over the batch.
pub fn batch_loss(kind: LossKind, batch: &LogitsBatch, cfg: &LossConfig) -> f64 {
    let n = batch.len().max(1) as f64;
    (0..batch.len())
        .map(|i| loss_value(kind, &softmax(batch.row(i)), batch.label(i), cfg))
        .sum::<f64>()
        / n
}

/// dL/dp_y for a loss that depends on the probabilities only through p_y.
fn dloss_dpy(kind: LossKind, p_y: f64, cfg: &LossConfig) -> f64 {
    let p = p_y.max(PROB_EPS);
    match kind {
        LossKind::Ce => -1.0 / p,
        LossKind::Sce => cfg.alpha * (-1.0 / p) + cfg.beta * (-cfg.gamma),
        LossKind::Gce => -libm::pow(p, cfg.q - 1.0),
        LossKind::Mixed => {
            cfg.lambda * (-1.0 / p) + (1.0 - cfg.lambda) * (-libm::pow(p, cfg.q - 1.0))
        }
    }
}

/// Mean-reduced gradient of the batch loss w.r.t. the logits,
/// an n x C row-major matrix.
pub fn loss_gradient(kind: LossKind, batch: &LogitsBatch, cfg: &LossConfig) -> Vec<f64> {
    let c = batch.classes;
    let n = batch.len().max(1) as f64;
    let mut grad = alloc::vec![0.0; batch.len() * c];
    for i in 0..batch.len() {
        let p = softmax(batch.row(i));
        let y = batch.label(i);
        let g = dloss_dpy(kind, p[y], cfg);
        // dp_y/dz_c = p_y (delta_{cy} - p_c)
        let row = &mut grad[i * c..(i + 1) * c];
        for (cidx, r) in row.iter_mut().enumerate() {
            let delta = if cidx == y { 1.0 } else { 0.0 };
            *r = g * p[y] * (delta - p[cidx]) / n;
        }
    }
    grad
}

/// Which loss applies at `epoch` given the warmup schedule.
pub fn loss_for_epoch(epoch: usize, cfg: &LossConfig) -> LossKind {
    if epoch < cfg.warmup_epochs {
        LossKind::Ce
    } else {
        cfg.kind
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = core::f64::consts::LN_2;

    #[test]
    fn softmax_symmetry_and_hand_value() {
        let p = softmax(&[0.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        let p = softmax(&[libm::log(3.0), 0.0]);
        assert!((p[0] - 0.75).abs() < 1e-12);
        assert!((p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariant_and_normalized() {
        let z = [1.3, -0.2, 4.0, 0.7];
        let shifted: Vec<f64> = z.iter().map(|v| v + 11.5).collect();
        let a = softmax(&z);
        let b = softmax(&shifted);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ce_hand_values() {
        assert_eq!(ce(&[1.0, 0.0], 0), 0.0);
        assert!((ce(&[0.5, 0.5], 0) - LN2).abs() < 1e-12);
        // floor: -ln(eps)
        let clamped = ce(&[0.0, 1.0], 0);
        assert!((clamped - (-libm::log(PROB_EPS))).abs() < 1e-9);
    }

    #[test]
    fn rce_hand_values() {
        assert_eq!(rce(&[1.0, 0.0], 0, 4.0), 0.0);
        assert!((rce(&[0.5, 0.5], 0, 4.0) - 2.0).abs() < 1e-12);
        assert!((rce(&[0.0, 1.0], 0, 4.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sce_hand_value_and_degeneracy() {
        let v = sce(&[0.5, 0.5], 0, 0.1, 1.0, 4.0);
        assert!((v - (0.1 * LN2 + 2.0)).abs() < 1e-12);
        let p = [0.3, 0.7];
        assert_eq!(sce(&p, 1, 1.0, 0.0, 4.0), ce(&p, 1));
        assert_eq!(sce(&[1.0, 0.0], 0, 0.1, 1.0, 4.0), 0.0);
    }

    #[test]
    fn gce_hand_values_and_limits() {
        assert!((gce(&[0.3, 0.7], 0, 1.0) - 0.7).abs() < 1e-12);
        let v = gce(&[0.5, 0.5], 0, 0.7);
        assert!((v - (1.0 - libm::pow(0.5, 0.7)) / 0.7).abs() < 1e-12);
        assert!((v - 0.5492).abs() < 1e-4);
        // small-q limit approaches CE
        assert!((gce(&[0.5, 0.5], 0, 0.001) - LN2).abs() < 1e-3);
    }

    #[test]
    fn mixed_hand_value_and_endpoints() {
        let p = [0.5, 0.5];
        assert_eq!(mixed(&p, 0, 1.0, 0.7), ce(&p, 0));
        assert_eq!(mixed(&p, 0, 0.0, 0.7), gce(&p, 0, 0.7));
        let v = mixed(&p, 0, 0.4, 0.7);
        assert!((v - (0.4 * LN2 + 0.6 * gce(&p, 0, 0.7))).abs() < 1e-12);
        assert!((v - 0.6068).abs() < 1e-4);
    }

    #[test]
    fn sce_decomposition_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = LossConfig::default();
        for _ in 0..200 {
            let z: Vec<f64> = (0..5).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let y = rng.gen_range(0..5);
            let p = softmax(&z);
            let lhs = sce(&p, y, cfg.alpha, cfg.beta, cfg.gamma);
            let rhs = cfg.alpha * ce(&p, y) + cfg.beta * rce(&p, y, cfg.gamma);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn all_losses_nonnegative_and_zero_at_certainty() {
        let certain = [1.0, 0.0, 0.0];
        let cfg = LossConfig::default();
        for kind in [LossKind::Ce, LossKind::Sce, LossKind::Gce, LossKind::Mixed] {
            assert_eq!(loss_value(kind, &certain, 0, &cfg), 0.0, "{kind}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let z: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let p = softmax(&z);
            for kind in [LossKind::Ce, LossKind::Sce, LossKind::Gce, LossKind::Mixed] {
                assert!(loss_value(kind, &p, 0, &cfg) >= 0.0);
            }
        }
    }

    #[test]
    fn ce_gradient_hand_value() {
        let batch = LogitsBatch::new(vec![0.0, 0.0], vec![0], 2).unwrap();
        let g = loss_gradient(LossKind::Ce, &batch, &LossConfig::default());
        assert!((g[0] - (-0.5)).abs() < 1e-12);
        assert!((g[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn certain_prediction_has_zero_gradient_for_ce_and_gce() {
        // logits pushing p_y to 1 within f64
        let batch = LogitsBatch::new(vec![60.0, 0.0, 0.0], vec![0], 3).unwrap();
        let cfg = LossConfig::default();
        for kind in [LossKind::Ce, LossKind::Gce] {
            let g = loss_gradient(kind, &batch, &cfg);
            for v in g {
                assert!(v.abs() < 1e-12, "{kind}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_all_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cfg = LossConfig::default();
        let h = 1e-6;
        for _ in 0..20 {
            let n = 3;
            let c = 4;
            let logits: Vec<f64> = (0..n * c).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
            for kind in [LossKind::Ce, LossKind::Sce, LossKind::Gce, LossKind::Mixed] {
                let batch = LogitsBatch::new(logits.clone(), labels.clone(), c).unwrap();
                let grad = loss_gradient(kind, &batch, &cfg);
                for idx in 0..n * c {
                    let mut lp = logits.clone();
                    lp[idx] += h;
                    let mut lm = logits.clone();
                    lm[idx] -= h;
                    let fp =
                        batch_loss(kind, &LogitsBatch::new(lp, labels.clone(), c).unwrap(), &cfg);
                    let fm =
                        batch_loss(kind, &LogitsBatch::new(lm, labels.clone(), c).unwrap(), &cfg);
                    let fd = (fp - fm) / (2.0 * h);
                    let rel = (grad[idx] - fd).abs() / fd.abs().max(1e-6);
                    assert!(rel < 1e-5, "{kind} idx {idx}: {} vs {fd}", grad[idx]);
                }
            }
        }
    }

    #[test]
    fn warmup_schedule() {
        let cfg = LossConfig { kind: LossKind::Sce, ..Default::default() };
        assert_eq!(loss_for_epoch(0, &cfg), LossKind::Ce);
        assert_eq!(loss_for_epoch(1, &cfg), LossKind::Ce);
        assert_eq!(loss_for_epoch(2, &cfg), LossKind::Sce);
        let no_warmup = LossConfig { warmup_epochs: 0, ..cfg };
        assert_eq!(loss_for_epoch(0, &no_warmup), LossKind::Sce);
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::default().validate().is_ok());
        assert!(LossConfig { q: 0.0, ..Default::default() }.validate().is_err());
        assert!(LossConfig { lambda: 1.2, ..Default::default() }.validate().is_err());
        assert!(LossConfig { gamma: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn label_out_of_range_rejected() {
        assert!(matches!(
            LogitsBatch::new(vec![0.0, 0.0], vec![2], 2),
            Err(LossError::LabelOutOfRange { .. })
        ));
    }
}
