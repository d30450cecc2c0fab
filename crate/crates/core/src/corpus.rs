//! Commonsense fact corpus and evaluation records.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::tokenize::tokenize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusError {
    EmptyText { id: String },
    DuplicateId { id: String },
    EmptyQuestion { id: String },
    GoldAnswerNotInOptions { id: String, gold: String },
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::EmptyText { id } => write!(f, "fact {id}: empty text"),
            CorpusError::DuplicateId { id } => write!(f, "duplicate id {id}"),
            CorpusError::EmptyQuestion { id } => write!(f, "record {id}: empty question"),
            CorpusError::GoldAnswerNotInOptions { id, gold } => {
                write!(f, "record {id}: gold answer {gold:?} not in options")
            }
        }
    }
}

/// One commonsense sentence with its derived token list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub id: String,
    pub text: String,
    pub source: String,
    #[serde(skip)]
    pub tokens: Vec<String>,
}

impl Fact {
    pub fn new(id: &str, text: &str, source: &str) -> Result<Self, CorpusError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(CorpusError::EmptyText { id: String::from(id) });
        }
        let tokens = tokenize(trimmed);
        if tokens.is_empty() {
            return Err(CorpusError::EmptyText { id: String::from(id) });
        }
        Ok(Fact {
            id: String::from(id),
            text: String::from(trimmed),
            source: String::from(source),
            tokens,
        })
    }
}

/// An ordered, immutable-after-build fact collection with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub name: String,
    facts: Vec<Fact>,
    by_id: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(name: &str) -> Self {
        Corpus { name: String::from(name), facts: Vec::new(), by_id: BTreeMap::new() }
    }

    pub fn push(&mut self, fact: Fact) -> Result<(), CorpusError> {
        if self.by_id.contains_key(&fact.id) {
            return Err(CorpusError::DuplicateId { id: fact.id });
        }
        self.by_id.insert(fact.id.clone(), self.facts.len());
        self.facts.push(fact);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<&Fact> {
        self.facts.get(idx)
    }

    pub fn by_id(&self, id: &str) -> Option<&Fact> {
        self.by_id.get(id).map(|&i| &self.facts[i])
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Fact> {
        self.facts.iter()
    }
}

/// One evaluation instance: image reference, question, answer options,
/// gold answer, and an optional gold explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub image_ref: String,
    pub question: String,
    pub options: Vec<String>,
    pub gold_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_explanation: Option<String>,
    pub dataset: String,
}

impl EvalRecord {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.question.trim().is_empty() {
            return Err(CorpusError::EmptyQuestion { id: self.id.clone() });
        }
        if !self.options.is_empty() && !self.options.contains(&self.gold_answer) {
            return Err(CorpusError::GoldAnswerNotInOptions {
                id: self.id.clone(),
                gold: self.gold_answer.clone(),
            });
        }
        Ok(())
    }
}
