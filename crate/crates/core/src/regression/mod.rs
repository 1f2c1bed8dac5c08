//! Ridge regression and its training protocol.
//!
//! [`fit_ridge`] minimizes `‖y − XW‖² + α‖W‖²` in closed form, optionally
//! with an unpenalized intercept fitted by centering. [`grid_search_cv`] picks
//! α by repeated k-fold cross-validation on mean R², [`train_final`] refits at
//! that α, and [`evaluate_spaces`] produces the held-out R² table per feature
//! space and target.

mod cv;
mod evaluate;
mod metrics;
mod persist;
mod ridge;

use std::path::PathBuf;

pub use cv::{
    grid_search_cv, grid_search_cv_multi, kfold_indices, read_cv_summary, write_cv_report, CvConfig,
    CvReport, DEFAULT_ALPHA_GRID,
};
pub use evaluate::{
    evaluate_spaces, read_evaluation_csv, write_evaluation_csv, EvaluationCsvRow, EvaluationRow,
    EvaluationTable,
};
pub use metrics::r_squared;
pub use persist::{load_model, model_to_json, save_model, MODEL_SCHEMA_VERSION};
pub use ridge::{fit_ridge, fit_ridge_with, predict, train_final, RidgeModel, Solver, TrainingMeta};

#[derive(Debug, thiserror::Error)]
pub enum RegressionError {
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("singular system at alpha = {alpha}: X is not of full column rank")]
    SingularSystem { alpha: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least {needed} observations, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("R² is undefined for a constant truth vector")]
    ConstantTruth,
    #[error("invalid penalty alpha = {0}")]
    BadAlpha(f64),
    #[error("cannot split {n} rows into {k} folds")]
    BadFoldCount { n: usize, k: usize },
    #[error("invalid CV configuration: {0}")]
    InvalidConfig(String),
    #[error("fit failed at alpha = {alpha}, round {round}, fold {fold}: {source}")]
    CvCell {
        alpha: f64,
        round: usize,
        fold: usize,
        #[source]
        source: Box<RegressionError>,
    },
    #[error("every CV score is missing (constant targets in all folds)")]
    AllScoresMissing,
    #[error("model schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u64 },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("{space}: {missing} split ids have no feature row")]
    SplitCoverage { space: String, missing: usize },
    #[error("target `{0}` is not in the ratings table")]
    UnknownTarget(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
