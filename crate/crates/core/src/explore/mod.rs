//! Constrained design exploration over template autoencoders.
//!
//! The search maximises a performance function of AUC, parameter count and
//! MACs subject to a parameter ceiling and an AUC floor. Candidates are
//! scored on a validation partition; the test set is never touched here.

mod candidate;
mod perf;
mod search;
mod space;

use thiserror::Error;

use crate::anomaly::AnomalyError;
use crate::arch::ArchError;

pub use candidate::{evaluate_candidate, proxy_budget, Candidate, CandidateStatus, SearchData, ValClip};
pub use perf::{indicator, perf_fn, AucFloorMode, Constraints, PerfFnConfig, DEFAULT_MAX_PARAMS};
pub use search::{search, GenerationRecord, SearchLog, SearchOptions, Strategy};
pub use space::{SearchPoint, SearchSpace};

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("invalid constraints: {0}")]
    InvalidConstraints(String),
    #[error("performance function domain error: {0}")]
    Domain(String),
    #[error("invalid search data: {0}")]
    Data(String),
    #[error("no feasible candidate found after {evaluated} evaluations{}", best_infeasible.as_ref().map(|c| format!("; best infeasible: {} (params {}, auc {:?})", c.arch.name(), c.params, c.auc)).unwrap_or_default())]
    NoFeasible {
        evaluated: usize,
        best_infeasible: Option<Box<Candidate>>,
    },
    #[error("could not build worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Anomaly(#[from] AnomalyError),
    #[error(transparent)]
    Arch(#[from] ArchError),
}
