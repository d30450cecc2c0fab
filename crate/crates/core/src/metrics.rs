//! Text-overlap and embedding metrics for retrieval quality and answer
//! evaluation: cumulative BLEU-k with add-epsilon smoothing, ROUGE-n
//! and ROUGE-L F1, cosine similarity, exact match after normalization,
//! cosine-threshold accuracy, and @k report aggregation (per-record
//! max over the top-k, then mean).

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::client::{ClientError, Embedder};
use crate::embed::EmbeddingVector;
use crate::tokenize::tokenize;

/// Smoothing constant for zero n-gram counts in BLEU.
pub const BLEU_EPS: f64 = 1e-9;

/// Default cosine-similarity threshold for answer accuracy.
pub const COSINE_THRESHOLD: f64 = 0.71;

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts: BTreeMap<&[String], usize> = BTreeMap::new();
    if tokens.len() >= n && n > 0 {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_matches(cand: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(reference, n);
    let total: usize = c.values().sum();
    let matched: usize =
        c.iter().map(|(gram, &cnt)| cnt.min(r.get(gram).copied().unwrap_or(0))).sum();
    (matched, total)
}

/// Cumulative BLEU-k: geometric mean of modified n-gram precisions for
/// n = 1..k, times the brevity penalty exp(min(0, 1 - r/c)). Zero
/// counts are epsilon-smoothed; an empty candidate scores 0.
pub fn bleu_k(candidate: &str, reference: &str, k: usize) -> f64 {
    assert!(k >= 1, "k must be >= 1");
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    if cand.is_empty() {
        return 0.0;
    }
    if cand == refr {
        return 1.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=k {
        let (matched, total) = clipped_matches(&cand, &refr, n);
        let p = if total == 0 {
            // candidate too short for this order; vacuous unless the
            // reference has n-grams the candidate cannot match
            if refr.len() >= n {
                BLEU_EPS
            } else {
                1.0
            }
        } else if matched == 0 {
            BLEU_EPS
        } else {
            matched as f64 / total as f64
        };
        log_sum += libm::log(p);
    }
    let precision = libm::exp(log_sum / k as f64);
    let bp = if cand.len() >= refr.len() {
        1.0
    } else {
        libm::exp(1.0 - refr.len() as f64 / cand.len() as f64)
    };
    precision * bp
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// ROUGE-n: F1 of clipped n-gram overlap.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> f64 {
    assert!(n >= 1, "n must be >= 1");
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    if cand == refr {
        return if cand.is_empty() { 0.0 } else { 1.0 };
    }
    let (matched, cand_total) = clipped_matches(&cand, &refr, n);
    let ref_total = refr.len().saturating_sub(n - 1).min(refr.len());
    if cand_total == 0 || ref_total == 0 {
        return 0.0;
    }
    f1(matched as f64 / cand_total as f64, matched as f64 / ref_total as f64)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = alloc::vec![0usize; b.len() + 1];
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L: F1 over the longest common subsequence.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&cand, &refr) as f64;
    f1(lcs / cand.len() as f64, lcs / refr.len() as f64)
}

/// Cosine similarity of two unit vectors (their dot product).
pub fn cosine_sim(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    a.dot(b)
}

fn normalize_answer(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Exact string match after lowercase + trim normalization.
pub fn exact_match(pred: &str, gold: &str) -> u8 {
    u8::from(normalize_answer(pred) == normalize_answer(gold))
}

/// 1 iff the embedded prediction and gold answer have cosine similarity
/// at or above `threshold`.
pub fn cosine_accuracy(
    pred: &str,
    gold: &str,
    embedder: &dyn Embedder,
    threshold: f64,
) -> Result<u8, ClientError> {
    let a = embedder.embed_text(pred)?;
    let b = embedder.embed_text(gold)?;
    Ok(u8::from(cosine_sim(&a, &b) >= threshold))
}

/// How the per-record score aggregates over the top-k candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggMode {
    /// Best candidate counts (keeps @10 >= @5).
    Max,
    Mean,
}

/// Per-metric means over a record set, on the 0-100 percent scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cosine: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_acc: Option<f64>,
    pub k: usize,
    pub record_count: usize,
}

impl MetricReport {
    /// Aligned-column text table, one row per metric.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, f64)> = alloc::vec![
            ("B-1".to_string(), self.b1),
            ("B-2".to_string(), self.b2),
            ("B-3".to_string(), self.b3),
            ("R-1".to_string(), self.r1),
            ("R-2".to_string(), self.r2),
            ("R-L".to_string(), self.rl),
        ];
        if let Some(c) = self.cosine {
            rows.push(("Cosine".to_string(), c));
        }
        if let Some(e) = self.em {
            rows.push(("EM".to_string(), e));
        }
        if let Some(t) = self.threshold_acc {
            rows.push(("Cos-Acc".to_string(), t));
        }
        let mut out = alloc::format!("metric    @{:<4} (n={})\n", self.k, self.record_count);
        for (name, v) in rows {
            out.push_str(&alloc::format!("{name:<9} {v:>6.2}\n"));
        }
        out
    }
}

/// One record to score: the gold explanation and the texts of its
/// top-k retrieved candidates (or generated explanations), rank order.
#[derive(Debug, Clone)]
pub struct ScoredRecord {
    pub gold: String,
    pub candidates: Vec<String>,
}

fn aggregate(scores: &[f64], mode: AggMode) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    match mode {
        AggMode::Max => scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        AggMode::Mean => scores.iter().sum::<f64>() / scores.len() as f64,
    }
}

/// Score each record's top-k candidates against its gold explanation,
/// aggregate per record, and average over records (reported x100).
pub fn retrieval_report(
    records: &[ScoredRecord],
    k: usize,
    mode: AggMode,
    embedder: Option<&dyn Embedder>,
) -> Result<MetricReport, ClientError> {
    assert!(!records.is_empty(), "record set must be non-empty");
    let n = records.len() as f64;
    let mut sums = [0.0f64; 6];
    let mut cos_sum = 0.0;
    for rec in records {
        let top: Vec<&String> = rec.candidates.iter().take(k).collect();
        let per_metric: [Vec<f64>; 6] = [
            top.iter().map(|c| bleu_k(c, &rec.gold, 1)).collect(),
            top.iter().map(|c| bleu_k(c, &rec.gold, 2)).collect(),
            top.iter().map(|c| bleu_k(c, &rec.gold, 3)).collect(),
            top.iter().map(|c| rouge_n(c, &rec.gold, 1)).collect(),
            top.iter().map(|c| rouge_n(c, &rec.gold, 2)).collect(),
            top.iter().map(|c| rouge_l(c, &rec.gold)).collect(),
        ];
        for (sum, scores) in sums.iter_mut().zip(&per_metric) {
            *sum += aggregate(scores, mode);
        }
        if let Some(e) = embedder {
            let gold_v = e.embed_text(&rec.gold)?;
            let cos: Vec<f64> = top
                .iter()
                .map(|c| e.embed_text(c).map(|v| cosine_sim(&v, &gold_v)))
                .collect::<Result<_, _>>()?;
            cos_sum += aggregate(&cos, mode);
        }
    }
    Ok(MetricReport {
        b1: 100.0 * sums[0] / n,
        b2: 100.0 * sums[1] / n,
        b3: 100.0 * sums[2] / n,
        r1: 100.0 * sums[3] / n,
        r2: 100.0 * sums[4] / n,
        rl: 100.0 * sums[5] / n,
        cosine: embedder.map(|_| 100.0 * cos_sum / n),
        em: None,
        threshold_acc: None,
        k,
        record_count: records.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::MockEmbedder;

    #[test]
    fn identity_scores_one() {
        let s = "a cat sat on the mat";
        for k in 1..=3 {
            assert_eq!(bleu_k(s, s, k), 1.0);
            assert_eq!(rouge_n(s, s, k), 1.0);
        }
        assert_eq!(rouge_l(s, s), 1.0);
    }

    #[test]
    fn bleu1_hand_example_with_brevity_penalty() {
        // precision 1.0, BP = e^(1 - 6/3)
        let b = bleu_k("the cat sat", "the cat sat on the mat", 1);
        assert!((b - libm::exp(-1.0)).abs() < 1e-9);
        assert!((b - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn bleu_zero_overlap_is_smoothed_to_near_zero() {
        let b = bleu_k("alpha beta gamma", "delta epsilon zeta", 1);
        assert!(b < 1e-6);
        assert!(b > 0.0);
    }

    #[test]
    fn bleu_empty_candidate_is_zero() {
        assert_eq!(bleu_k("", "some reference", 2), 0.0);
    }

    #[test]
    fn rouge1_hand_example() {
        // matches {cat, sat}: recall 2/4, precision 2/3, F1 = 4/7
        let r = rouge_n("a cat sat", "the cat sat down", 1);
        assert!((r - 4.0 / 7.0).abs() < 1e-9);
        assert!((r - 0.5714).abs() < 1e-4);
    }

    #[test]
    fn disjoint_vocabulary_scores_zero() {
        let c = "alpha beta gamma delta";
        let r = "one two three four";
        assert_eq!(rouge_n(c, r, 1), 0.0);
        assert_eq!(rouge_n(c, r, 2), 0.0);
        assert_eq!(rouge_l(c, r), 0.0);
        assert!(bleu_k(c, r, 3) < 1e-6);
    }

    #[test]
    fn cosine_hand_values() {
        let a = EmbeddingVector::unit(vec![1.0, 0.0]).unwrap();
        let b = EmbeddingVector::unit(vec![0.0, 1.0]).unwrap();
        let c = EmbeddingVector::unit(vec![0.6, 0.8]).unwrap();
        assert!((cosine_sim(&a, &a) - 1.0).abs() < 1e-12);
        assert!(cosine_sim(&a, &b).abs() < 1e-12);
        assert!((cosine_sim(&a, &c) - 0.6).abs() < 1e-7);
    }

    #[test]
    fn exact_match_normalizes() {
        assert_eq!(exact_match("Dog ", "dog"), 1);
        assert_eq!(exact_match("dog", "cat"), 0);
    }

    #[test]
    fn cosine_accuracy_thresholding() {
        let e = MockEmbedder::new(3, 32);
        assert_eq!(cosine_accuracy("a red dog", "a red dog", &e, COSINE_THRESHOLD).unwrap(), 1);
        // mock embeddings of unrelated words sit near zero cosine
        assert_eq!(cosine_accuracy("qwerty", "zxcvbn", &e, COSINE_THRESHOLD).unwrap(), 0);
    }

    #[test]
    fn report_k1_is_single_candidate_score() {
        let records = vec![ScoredRecord {
            gold: "the cat sat on the mat".into(),
            candidates: vec!["the cat sat".into()],
        }];
        let rep = retrieval_report(&records, 1, AggMode::Max, None).unwrap();
        assert!((rep.b1 - 100.0 * libm::exp(-1.0)).abs() < 1e-6);
        assert!((rep.r1 / 100.0 - rouge_n("the cat sat", "the cat sat on the mat", 1)).abs() < 1e-12);
    }

    #[test]
    fn verbatim_gold_in_topk_gives_full_rouge_l() {
        let records = vec![ScoredRecord {
            gold: "dogs like to play fetch".into(),
            candidates: vec![
                "unrelated text entirely".into(),
                "dogs like to play fetch".into(),
                "another stray line".into(),
            ],
        }];
        let rep = retrieval_report(&records, 5, AggMode::Max, None).unwrap();
        assert_eq!(rep.rl, 100.0);
    }

    #[test]
    fn report_matches_hand_average() {
        let records = vec![
            ScoredRecord { gold: "a b c".into(), candidates: vec!["a b c".into()] },
            ScoredRecord { gold: "a b c".into(), candidates: vec!["x y z".into()] },
        ];
        let rep = retrieval_report(&records, 1, AggMode::Max, None).unwrap();
        assert!((rep.r1 - 50.0).abs() < 1e-9);
        assert!((rep.rl - 50.0).abs() < 1e-9);
    }

    #[test]
    fn larger_k_never_lowers_max_report() {
        let records = vec![ScoredRecord {
            gold: "the dog runs fast".into(),
            candidates: (0..10)
                .map(|i| {
                    if i == 7 {
                        "the dog runs fast".to_string()
                    } else {
                        alloc::format!("filler sentence number {i}")
                    }
                })
                .collect(),
        }];
        let r5 = retrieval_report(&records, 5, AggMode::Max, None).unwrap();
        let r10 = retrieval_report(&records, 10, AggMode::Max, None).unwrap();
        assert!(r10.rl >= r5.rl);
        assert!(r10.b1 >= r5.b1);
        assert_eq!(r10.rl, 100.0);
    }

    #[test]
    fn table_renders_all_rows() {
        let rep = MetricReport {
            b1: 10.0,
            b2: 5.0,
            b3: 2.0,
            r1: 20.0,
            r2: 8.0,
            rl: 18.0,
            cosine: Some(55.0),
            em: None,
            threshold_acc: None,
            k: 5,
            record_count: 3,
        };
        let t = rep.to_table();
        assert!(t.contains("B-1"));
        assert!(t.contains("Cosine"));
        assert!(t.contains("@5"));
    }
}
