//! Normal-only autoencoder training, reconstruction-error scoring and AUC.

mod auc;
mod normalize;
mod report;
mod score;
mod train;

use thiserror::Error;

use crate::arch::ArchError;
use crate::audio_io::{AudioError, Label};
use crate::features::FeatureError;
use crate::nn::NnError;

pub use auc::compute_auc;
pub use normalize::{denormalize, norm_stats, normalize};
pub use report::{write_scores_csv, write_scores_jsonl, write_summary_csv, SUMMARY_CSV_HEADER};
pub use score::{evaluate, score_clip, Aggregation, AnomalyScore, EvalReport, MachineTag, Scorer};
pub use train::{train, train_with_history, TrainConfig, TrainHistory};

#[derive(Debug, Error)]
pub enum AnomalyError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("need at least {needed} training crops, got {got}")]
    NotEnoughCrops { needed: usize, got: usize },
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("degenerate normalisation stats: min {min} must be below max {max}")]
    DegenerateStats { min: f64, max: f64 },
    #[error("single-class input: every score is labelled {0}, AUC needs both labels")]
    SingleClass(Label),
    #[error("no scores given")]
    Empty,
    #[error("score is not finite: {0}")]
    NonFiniteScore(f64),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
