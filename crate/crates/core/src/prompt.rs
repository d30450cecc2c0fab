//! Explanation-prompt assembly (Types 0-7) and output filtering.
//!
//! Each prompt type fixes a component set over {TC, DC, RC, O, Q, RF,
//! GT-L}. Assembly is a pure function: fixed instruction header, one
//! labeled line per component in template order, then the word-count
//! instruction and the dataset's forbidden-words clause. Type 7 has no
//! local template; it is delegated wholly to a generation client.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Fact;
use crate::embed::VisualContext;

#[derive(Debug, Clone, PartialEq)]
pub enum PromptError {
    MissingComponent { component: &'static str },
    GoldLabelForNonType0,
    MissingGoldLabel,
    ClientSideKind,
}

impl fmt::Display for PromptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptError::MissingComponent { component } => {
                write!(f, "prompt requires missing component {component}")
            }
            PromptError::GoldLabelForNonType0 => {
                write!(f, "gold label is only allowed for Type-0 prompts")
            }
            PromptError::MissingGoldLabel => write!(f, "Type-0 prompts require the gold label"),
            PromptError::ClientSideKind => {
                write!(f, "Type-7 has no local template; it is generated client-side")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptKind {
    Type0,
    Type1,
    Type2,
    Type3,
    Type4,
    Type5,
    Type6,
    Type7,
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Type{}", *self as u8)
    }
}

/// Component flags for one prompt type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Components {
    pub tc: bool,
    pub dc: bool,
    pub rc: bool,
    pub objects: bool,
    pub question: bool,
    pub facts: bool,
    pub gold_label: bool,
}

impl PromptKind {
    pub fn components(&self) -> Components {
        let q = Components { question: true, ..Default::default() };
        match self {
            PromptKind::Type0 => Components { tc: true, facts: true, gold_label: true, ..q },
            PromptKind::Type1 => Components { tc: true, facts: true, ..q },
            PromptKind::Type2 => Components { dc: true, facts: true, ..q },
            PromptKind::Type3 => Components { rc: true, facts: true, ..q },
            PromptKind::Type4 => Components { rc: true, objects: true, facts: true, ..q },
            PromptKind::Type5 => {
                Components { dc: true, rc: true, objects: true, facts: true, ..q }
            }
            PromptKind::Type6 => Components { dc: true, rc: true, objects: true, ..q },
            PromptKind::Type7 => Components::default(),
        }
    }
}

const HEADER: &str =
    "Given an image description, the task is to generate an explanation based on the following information.";
const INSTRUCTION: &str = "You strictly need to produce a 15-20 word single-line explanation to help VQA models derive conclusions and nothing else.";

const BASE_FORBIDDEN: &[&str] = &["image description", "captions"];
const NLI_FORBIDDEN: &[&str] = &["image description", "captions", "entailment", "contradiction"];

/// Forbidden words for a dataset tag. NLI datasets additionally forbid
/// the label words themselves.
pub fn forbidden_words(dataset: &str) -> &'static [&'static str] {
    if dataset.to_lowercase().contains("snli") {
        NLI_FORBIDDEN
    } else {
        BASE_FORBIDDEN
    }
}

fn forbidden_clause(dataset: &str) -> String {
    let quoted: Vec<String> =
        forbidden_words(dataset).iter().map(|w| alloc::format!("\"{w}\"")).collect();
    alloc::format!("Forbidden words: **{}**.", quoted.join(", "))
}

/// Assemble the explanation prompt for `kind`. Deterministic;
/// byte-identical output for identical inputs.
pub fn assemble_prompt(
    kind: PromptKind,
    question: &str,
    ctx: &VisualContext,
    facts: &[&Fact],
    gold_label: Option<&str>,
    dataset: &str,
) -> Result<String, PromptError> {
    if kind == PromptKind::Type7 {
        return Err(PromptError::ClientSideKind);
    }
    let flags = kind.components();
    if flags.gold_label && gold_label.is_none() {
        return Err(PromptError::MissingGoldLabel);
    }
    if !flags.gold_label && gold_label.is_some() {
        return Err(PromptError::GoldLabelForNonType0);
    }
    let mut lines: Vec<String> = Vec::new();
    lines.push(HEADER.to_string());
    lines.push(String::new());
    if flags.tc {
        let tc = ctx
            .traditional_caption
            .as_deref()
            .ok_or(PromptError::MissingComponent { component: "TC" })?;
        lines.push(alloc::format!("Traditional Caption (TC): {tc}"));
    }
    if flags.dc {
        let dc = ctx
            .dense_caption
            .as_deref()
            .ok_or(PromptError::MissingComponent { component: "DC" })?;
        lines.push(alloc::format!("Dense Caption (DC): {dc}"));
    }
    if flags.rc {
        if ctx.region_captions.is_empty() {
            return Err(PromptError::MissingComponent { component: "RC" });
        }
        lines.push(alloc::format!("Region Caption (RC): {}", ctx.region_captions.join("; ")));
    }
    if flags.objects {
        if ctx.objects.is_empty() {
            return Err(PromptError::MissingComponent { component: "O" });
        }
        lines.push(alloc::format!("Objects (O): {}", ctx.objects.join(", ")));
    }
    if flags.question {
        lines.push(alloc::format!("Question (Q): {question}"));
    }
    if flags.facts {
        if facts.is_empty() {
            return Err(PromptError::MissingComponent { component: "RF" });
        }
        lines.push("Retrieved Facts (RF):".to_string());
        for f in facts {
            lines.push(alloc::format!("Fact: {}", f.text));
        }
    }
    if flags.gold_label {
        lines.push(alloc::format!("Ground-truth Answer (GT-L): {}", gold_label.unwrap()));
    }
    lines.push(String::new());
    lines.push(INSTRUCTION.to_string());
    lines.push(forbidden_clause(dataset));
    Ok(lines.join("\n"))
}

/// An accepted explainer output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationText {
    pub text: String,
    pub word_count: usize,
    pub source_kind: PromptKind,
    /// Set when the word count falls outside the instructed 15-20 range.
    pub length_flagged: bool,
}

/// Outcome of the forbidden-word scan. Rejection is a value, not an
/// error.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterOutcome {
    Accepted(ExplanationText),
    Rejected { word: String },
}

/// Case-insensitive substring scan over the dataset's forbidden list.
pub fn filter_output(text: &str, dataset: &str, source_kind: PromptKind) -> FilterOutcome {
    let lower = text.to_lowercase();
    for &word in forbidden_words(dataset) {
        if lower.contains(word) {
            return FilterOutcome::Rejected { word: word.to_string() };
        }
    }
    let word_count = text.split_whitespace().count();
    FilterOutcome::Accepted(ExplanationText {
        text: text.to_string(),
        word_count,
        source_kind,
        length_flagged: !(15..=20).contains(&word_count),
    })
}
