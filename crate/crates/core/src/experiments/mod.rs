//! Seeded replica studies: gap decomposition, convergence-rate fits and
//! duality certification sweeps, with CSV / JSON output.

pub mod config;
pub mod gap;
pub mod output;
pub mod studies;

use std::path::PathBuf;

use thiserror::Error;

use crate::duality_check::DualityError;
use crate::grid_ops::GridError;
use crate::reconstruct::ReconstructError;
use crate::semidiscrete::SemiError;
use crate::walkers::WalkError;

pub use config::{StudyConfig, StudyKind};
pub use gap::{GapCheck, GapDecomposition, Target};
pub use output::{emit_metadata, emit_results, Check, Format, RunMetadata, StudyResult, StudyRow};
pub use studies::{
    run_deterministic_order, run_duality_suite, run_gap_vs_n, run_qv_study, run_rough_estimate, run_stability,
    run_study,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("smallness condition violated (margin {margin})")]
    Smallness { margin: f64 },
    #[error("reference solution unresolved: {0}")]
    Unresolved(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Semi(#[from] SemiError),
    #[error(transparent)]
    Duality(#[from] DualityError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
}
