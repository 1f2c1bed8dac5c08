//! Corpus scoring and group-level moral statistics.

mod bootstrap;
mod predictions;
mod report;
mod stats;

use std::path::PathBuf;

pub use bootstrap::{bootstrap_top_group, collect_groups, BootstrapResult, DEFAULT_RESAMPLES};
pub use predictions::{read_predictions, score_corpus, write_predictions, PredictionRow, PredictionTable};
pub use report::{
    read_bootstrap_json, read_cell_table_json, read_group_stats_csv, write_bootstrap_json,
    write_cell_table_json, write_group_stats_csv,
};
pub use stats::{
    by_category, by_category_year, foundation_profile, group_stats, year_group_table, Cell, CellTable,
    GroupStats, GOODNEWS_PARTIAL_YEARS,
};

/// The regional categories of the news corpus.
pub const REGION_CATEGORIES: [&str; 6] = [
    "nyregion",
    "us",
    "world/europe",
    "world/asia",
    "world/africa",
    "world/middleeast",
];

/// The topical categories of the news corpus.
pub const TOPIC_CATEGORIES: [&str; 5] = ["health", "sports", "business", "science", "technology"];

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("model for `{target}` was trained on {model}, features are {features}")]
    SpaceMismatch {
        target: String,
        model: String,
        features: String,
    },
    #[error("model for `{target}` expects {expected} features, matrix has {found}")]
    DimensionMismatch {
        target: String,
        expected: usize,
        found: usize,
    },
    #[error("no corpus metadata for id `{0}`")]
    MissingMetadata(String),
    #[error("no model supplied")]
    NoModels,
    #[error("target `{0}` is not in the prediction table")]
    UnknownTarget(String),
    #[error("group `{0}` has no rows")]
    UnknownGroup(String),
    #[error("bootstrap needs at least two non-empty groups")]
    SingleGroup,
    #[error("bootstrap needs at least one resample")]
    NoResamples,
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
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {detail}")]
    Malformed { path: PathBuf, detail: String },
}
