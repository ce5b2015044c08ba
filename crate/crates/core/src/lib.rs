//! Lightweight discourse connective detection.
//!
//! Tokens of POS-tagged text are labelled `O` / `B-Conn` / `I-Conn` by a
//! multiclass gradient-boosted tree ensemble over fourteen cheap
//! hand-crafted features (verb proximity, word shape, sentence position).
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: corpus files (CoNLL-U and a three-column TSV) and label statistics.
//! - [`features`]: vocabulary and the fixed feature schema.
//! - [`gbdt`]: softmax Newton boosting with exact greedy split finding.
//! - [`model_store`]: JSON model persistence.
//! - [`eval`]: exact-span scoring, per-connective error rows, inference timing.
//! - [`tuning`]: k-fold grid search.
//! - [`synthetic`]: generated corpora for tests, demos and benchmarks.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the command line uses.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod gbdt;
pub mod model_store;
pub mod scalar;
pub mod synthetic;
pub mod tuning;

pub use corpus::{Corpus, Document, Format, Label, LabelStats, Sentence, Token};
pub use error::{Error, Result};
pub use features::{FeatureMatrix, VerbPolicy, Vocabulary, FEATURE_NAMES, NUM_FEATURES};
pub use gbdt::{ClassWeights, Ensemble, GbdtModel, Hyperparams, ImportanceKind, Tree};
pub use scalar::Scalar;

/// Model over binary64 scores; the default everywhere.
pub type Model = GbdtModel<f64>;
/// Model over binary32 scores.
pub type ModelF32 = GbdtModel<f32>;
/// Feature matrix of `f64` values.
pub type Matrix = FeatureMatrix<f64>;
/// Feature matrix of `f32` values.
pub type MatrixF32 = FeatureMatrix<f32>;
