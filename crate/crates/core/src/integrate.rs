//! Reader-input construction and prediction aggregation.
//!
//! The reader consumes `<knowledge>[SEP]<question>` under a strict
//! token budget: if the concatenation exceeds the budget, tokens are
//! dropped from the end so the leading knowledge tokens survive.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// The literal separator token between knowledge and question.
pub const SEP: &str = "[SEP]";

/// Default token budget for small readers.
pub const DEFAULT_TOKEN_BUDGET: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum IntegrateError {
    EmptyQuestion,
    ZeroBudget,
    NoPredictions,
}

impl fmt::Display for IntegrateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntegrateError::EmptyQuestion => write!(f, "question must be non-empty"),
            IntegrateError::ZeroBudget => write!(f, "token budget must be >= 1"),
            IntegrateError::NoPredictions => write!(f, "majority vote needs predictions"),
        }
    }
}

/// The truncated, budgeted reader input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderInput {
    pub text: String,
    pub tokens: Vec<String>,
    pub image_ref: String,
    pub token_budget: usize,
    pub truncated: bool,
}

/// Concatenate knowledge, `[SEP]`, and question (the separator counts
/// as one token), then truncate from the end to `budget` tokens. Empty
/// knowledge yields the bare question with no separator.
pub fn build_reader_input<F>(
    knowledge: &str,
    question: &str,
    image_ref: &str,
    budget: usize,
    tokenizer: F,
) -> Result<ReaderInput, IntegrateError>
where
    F: Fn(&str) -> Vec<String>,
{
    if budget == 0 {
        return Err(IntegrateError::ZeroBudget);
    }
    let q_tokens = tokenizer(question);
    if q_tokens.is_empty() {
        return Err(IntegrateError::EmptyQuestion);
    }
    let mut tokens = tokenizer(knowledge);
    if !tokens.is_empty() {
        tokens.push(SEP.to_string());
    }
    tokens.extend(q_tokens);
    let truncated = tokens.len() > budget;
    tokens.truncate(budget);
    Ok(ReaderInput {
        text: tokens.join(" "),
        tokens,
        image_ref: image_ref.to_string(),
        token_budget: budget,
        truncated,
    })
}

/// Join `facts` with ". " into the knowledge string, then build the
/// reader input as usual.
pub fn build_k_fact_input<F>(
    facts: &[&str],
    question: &str,
    image_ref: &str,
    budget: usize,
    tokenizer: F,
) -> Result<ReaderInput, IntegrateError>
where
    F: Fn(&str) -> Vec<String>,
{
    let knowledge = facts.join(". ");
    build_reader_input(&knowledge, question, image_ref, budget, tokenizer)
}

/// One reader prediction with per-option scores and the knowledge
/// variant that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub scores: Vec<f64>,
    pub provenance: String,
}

/// Most frequent label wins; ties go to the label whose earliest
/// supporting prediction has the lowest rank (input order = fact rank).
pub fn majority_vote(predictions: &[Prediction]) -> Result<Prediction, IntegrateError> {
    if predictions.is_empty() {
        return Err(IntegrateError::NoPredictions);
    }
    // (label, count, earliest index), insertion-ordered
    let mut tally: Vec<(&str, usize, usize)> = Vec::new();
    for (idx, p) in predictions.iter().enumerate() {
        match tally.iter_mut().find(|(l, _, _)| *l == p.label) {
            Some(entry) => entry.1 += 1,
            None => tally.push((&p.label, 1, idx)),
        }
    }
    let &(label, _, earliest) = tally
        .iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
        .unwrap();
    Ok(Prediction {
        label: label.to_string(),
        scores: predictions[earliest].scores.clone(),
        provenance: alloc::format!("majority({})", predictions.len()),
    })
}
