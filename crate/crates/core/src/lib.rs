//! Tweet sentiment classification with hand-derived recurrent networks.
//!
//! The pipeline runs in stages:
//!
//! * [`corpus`] ingests raw tweets, cleans them and builds the vocabulary.
//! * [`embedding`] trains skip-gram word vectors with negative sampling.
//! * [`model`] implements Elman and bidirectional recurrent classifiers with
//!   full and truncated backpropagation through time.
//! * [`training`] balances, splits, batches and runs SGD, plus the
//!   hyperparameter grid.
//! * [`eval`] computes confusion matrices, accuracy, F1 and the
//!   false-negative share.
//! * [`analysis`] classifies a whole corpus and aggregates it by class and by
//!   calendar period.
//!
//! [`numeric`] holds the small dense linear algebra kernel everything above
//! is built on.

pub mod analysis;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod numeric;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
pub use training::SentimentLabel;
