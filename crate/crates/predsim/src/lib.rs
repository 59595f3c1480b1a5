//! Conditioned predictive similarity over prediction-based embeddings.
//!
//! Predictive similarity treats two embedding vectors as predictors: their
//! similarity is the correlation between the scores they assign to a
//! (weighted) distribution of target words. Reweighting that distribution —
//! e.g. toward the keywords of a political issue — conditions the metric on
//! a topic, which is what separates "talks about the same things" from
//! "talks about them the same way".
//!
//! The crate provides:
//!
//! - vocabulary building and vector file IO ([`vocab`], [`io`], [`model`]);
//! - a seeded skipgram-with-negative-sampling trainer, plain or
//!   source-augmented ([`trainer`]);
//! - weighted covariance conditioning and the closed-form similarity with
//!   its brute-force empirical twin ([`conditioning`], [`psim`]);
//! - aggregate media-vs-party tables, bloc averaging, and additive
//!   normalization ([`analysis`]).

pub mod analysis;
pub mod conditioning;
pub mod corpus;
pub mod error;
pub mod io;
pub mod model;
pub mod psim;
pub mod trainer;
pub mod vocab;

pub use analysis::{
    additive_fit, aggregate_similarity, bloc_average, read_groups, AdditiveFit, IssueSet,
    MetricKind, SimilarityTable, SourceGroup,
};
pub use conditioning::{read_keywords, weighted_covariance, ConditionedMetric, WeightSpec};
pub use corpus::{Document, TrainingCorpus};
pub use error::{Error, Result};
pub use io::{load_model, load_vectors, save_model, save_vectors, VectorFormat};
pub use model::{EmbeddingModel, VectorSet};
pub use psim::{conditioned_knn, cosine, psim, psim_empirical, source_psim, word_psim};
pub use trainer::{
    objective::{extract_pairs, objective_value, FixedNegatives, IndexedCorpus},
    sampler::NegativeSampler,
    train, SgnsTrainer, TrainConfig, TrainMode,
};
pub use vocab::{build_vocabulary, tokenize, TokenId, Vocabulary};
