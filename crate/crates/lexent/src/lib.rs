//! Retrieval and entailment pipeline toolkit for legal text collections.
//!
//! The crate chains classic IR machinery with a pluggable pairwise scorer:
//!
//! - [`corpus`] — document/paragraph/sentence model, ingestion, language filtering
//! - [`lexical`] — tokenization, tf-idf cosine, Okapi BM25 indexing and top-k search
//! - [`chunker`] — sliding-window chunking of long articles into training pairs
//! - [`datagen`] — gold/silver/augmented training-pair construction
//! - [`paralaw`] — cross-lingual sentence-pair pretraining samples and splits
//! - [`scorer`] — built-in hashed-feature logistic regression and an external
//!   scorer bridge speaking a JSON-lines wire protocol
//! - [`selflabel`] — one-pass train/predict/relabel/retrain denoising
//! - [`fusion`] — lexical-semantic score-matrix fusion, ranking, decision rules,
//!   and weight-learned ensembling
//! - [`harness`] — metrics (macro P/R, F-beta, accuracy), run files, config, CLI
//!
//! Every pipeline stage is deterministic given its inputs and a seed.

pub mod chunker;
pub mod corpus;
pub mod datagen;
pub mod fusion;
pub mod harness;
pub mod lexical;
pub mod matrix;
pub mod paralaw;
pub mod rng;
pub mod scorer;
pub mod selflabel;

pub use corpus::{DocKind, Document, Language, Paragraph};
pub use datagen::{LabeledPair, Provenance};
pub use lexical::{Bm25Index, Bm25Params};
pub use matrix::Matrix;
pub use scorer::{LogRegModel, ScorerBackend};
