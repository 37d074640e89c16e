//! Measure how closely a body of short messages follows the gender norms
//! learned by a fill-in-the-blank classifier, and estimate how that changes
//! around an event.
//!
//! The crate is organised as a pipeline:
//!
//! - [`corpus`]: tokenize, censor the target word pair, mask obvious
//!   gendered words and names, filter and split.
//! - [`embeddings`]: skip-gram word vectors with negative sampling.
//! - [`models`]: Naive Bayes, bag-of-word-vectors, LSTM and CNN classifiers
//!   with a shared minibatch SGD loop.
//! - [`evaluation`]: ROC AUC, confusion metrics, thresholds, word color and
//!   word-level accuracy differences.
//! - [`econometrics`]: panel design matrices, OLS with fixed effects and the
//!   cluster-robust / Newey-West variance estimators.
//! - [`pipeline`]: config-driven orchestration with run manifests.
//!
//! [`synth`] holds the planted-signal generators used by the demo and the
//! acceptance suite.

pub mod corpus;
pub mod econometrics;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod math;
pub mod models;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
