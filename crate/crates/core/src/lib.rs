//! Hierarchical reinforcement learning for (aspect, opinion, sentiment)
//! triplet extraction.
//!
//! A high-level policy scans a sentence and emits a sentiment option at every
//! token. Each non-`none` option launches two low-level BIO tagging subtasks,
//! first for the opinion span and then for the aspect span, conditioned on the
//! option and its anchor token. Training is teacher-forced pre-training
//! followed by REINFORCE fine-tuning.

pub(crate) mod binio;
pub mod config;
pub mod data;
pub mod domain;
pub mod encoder;
pub mod env;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod policy;
pub mod trainer;

pub use binio::DecodeError;
pub use config::{Config, ConfigError, ModelConfig, TrainConfig};
pub use domain::{
    bio_labels_for, decode_span, triplet_overlap_class, BioTag, EpisodeTrace, OverlapClass,
    Sentence, SentimentLabel, Span, SubtaskKind, SubtaskTrace, Triplet, Upos,
};
pub use model::Model;

/// RNG used for every stochastic decision (init, dropout, sampling, shuffling).
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}

/// Derive an independent stream from a base seed and a label.
pub fn derived_rng(seed: u64, stream: u64) -> SeededRng {
    // splitmix64 finaliser
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    seeded_rng(z ^ (z >> 31))
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] domain::DomainError),
    #[error(transparent)]
    Numeric(#[from] numerics::NumericError),
    #[error(transparent)]
    Checkpoint(#[from] numerics::CheckpointError),
    #[error(transparent)]
    Encoder(#[from] encoder::EncoderError),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
