//! Algorithmic core for a knowledge-augmented VQA pipeline.
//!
//! Everything in this crate is pure computation over in-memory data:
//! fact corpus types and tokenization, dense and late-interaction
//! retrieval scoring, contrastive projection-head tuning, explanation
//! prompt assembly, reader-input construction, noise-robust losses,
//! label-noise injection, and text-overlap metrics. IO, HTTP clients,
//! and the CLI live in the companion `factrag` crate.
//!
//! The crate is `no_std` (with `alloc`) so the scoring and loss kernels
//! can be embedded anywhere; tests link `std`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod client;
pub mod contrastive;
pub mod corpus;
pub mod embed;
pub mod integrate;
pub mod losses;
pub mod metrics;
pub mod mock;
pub mod noise;
pub mod prompt;
pub mod retrieval;
pub mod tokenize;
pub mod toy;

pub use corpus::{Corpus, CorpusError, EvalRecord, Fact};
pub use embed::{EmbeddingVector, TokenEmbeddings, VisualContext};
pub use retrieval::{IndexMode, QueryVariant, RetrievalHit, VectorIndex};
pub use tokenize::tokenize;
