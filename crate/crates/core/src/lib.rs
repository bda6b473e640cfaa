//! Sparse interpretable word embeddings.
//!
//! Two trainers turn a dense embedding into a sparse, higher-dimensional one:
//!
//! - [`spowv`]: sparse dictionary learning, alternating ISTA sparse coding with
//!   ridge-regularized dictionary gradient steps.
//! - [`spine`]: an autoencoder with a capped `[0, 1]` hidden layer trained on
//!   reconstruction, average-sparsity and partial-sparsity losses.
//!
//! Any embedding, dense or sparse, can then be scored with
//! [`eval_intrinsic`] (Spearman correlation against similarity benchmarks),
//! [`eval_extrinsic`] (ten-fold cross-validated sentence classification) and
//! [`eval_interpret`] (category-overlap interpretability score, top-word
//! probes, word-intrusion questions, heatmaps and coherence-driven
//! hyperparameter search).
//!
//! The `sparse-interp` binary exposes the whole pipeline; see [`cli`].

pub mod cli;
pub mod embed_io;
pub mod eval_interpret;
pub mod eval_extrinsic;
pub mod eval_intrinsic;
pub mod error;
pub mod numcore;
pub mod spine;
pub mod spowv;
pub mod synthetic;
pub mod textprep;

pub use embed_io::{CategoryDataset, EmbeddingMatrix, LabeledCorpus, SimilarityBenchmark};
pub use error::{Error, Result};
pub use numcore::{Matrix, SeededRng};

/// Magnitude below which a value counts as zero in sparsity statistics and
/// heatmap sign classes.
pub const ZERO_EPS: f64 = 1e-8;
