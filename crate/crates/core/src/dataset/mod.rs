//! Instruction/draft corpus construction.
//!
//! Per source video: deconstruct it through the ASR, OCR, shot and caption
//! backends, analyze the free-prompt dimensions with the judge, draw a
//! free prompt with random dimension dropout, let the judge verify it, then
//! assemble a sample with negative clips from other videos shuffled in.

pub mod assemble;
pub mod corpus;
pub mod deconstruct;
pub mod negatives;
pub mod pipeline;
pub mod prompt;
pub mod types;

use thiserror::Error;

use crate::backends::BackendError;
use crate::clips::ClipError;
use crate::sampling::SamplingError;

pub use assemble::{assemble_sample, InstructionTemplate};
pub use corpus::{read_corpus, read_predictions, write_corpus, write_predictions, PredictionLine};
pub use deconstruct::{deconstruct, normalize_asr, normalize_cuts};
pub use negatives::sample_negative_count;
pub use pipeline::{build_corpus, BuildConfig, BuildOutcome, VideoFailure};
pub use prompt::{analyze_dimensions, draw_retained, generate_free_prompt, verify_free_prompt, Verified};
pub use types::{
    Analysis, AsrSegment, ClipSource, DatasetSample, Deconstruction, Dimension, FreePrompt, NegativeCap, ProductInfo,
    VideoRef,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid product info: {0}")]
    InvalidProduct(String),
    #[error("invalid free prompt: {0}")]
    InvalidPrompt(String),
    #[error("unknown prompt dimension `{0}`")]
    UnknownDimension(String),
    #[error("invalid video {video_id}: {message}")]
    InvalidVideo { video_id: String, message: String },
    #[error("deconstruction of {0} has no shots or no speech")]
    EmptyDeconstruction(String),
    #[error("negative pool contains clips from the source video {0}")]
    PoolOverlap(String),
    #[error("dropout probability {0} is outside [0, 1)")]
    InvalidDropout(f64),
    #[error("judge revision is invalid: {0}")]
    RevisionInvalid(String),
    #[error("template: {0}")]
    Template(String),
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Clip(#[from] ClipError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
