//! On-disk dataset artifacts and the join that produces training-ready data.

mod captions;
mod corpus;
mod dataset;
mod embeddings;
mod ratings;
mod split;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use captions::{load_captions, write_captions, CaptionTable};
pub use corpus::{load_corpus, CorpusRecord, CorpusTable};
pub use dataset::{join_dataset, join_inputs, Dataset, JoinReport};
pub use embeddings::{
    memb_file_size, read_embeddings, read_embeddings_csv, write_embeddings, write_embeddings_csv,
    EmbeddingTable, MEMB_MAGIC,
};
pub use ratings::{load_ratings, RatingsTable, TargetVector, RATING_MAX, RATING_MIN};
pub use split::{assign_split, read_split, write_split, Role, SplitAssignment};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: i/o failure: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed CSV: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}: `{field}` = {value} is outside [1, 5]")]
    ValueOutOfRange {
        path: PathBuf,
        row: usize,
        field: String,
        value: f64,
    },
    #[error("{path}: row {row}: `{field}` is not a finite number ({value:?})")]
    NonFiniteValue {
        path: PathBuf,
        row: usize,
        field: String,
        value: String,
    },
    #[error("{path}: row {row}: duplicate id `{id}`")]
    DuplicateId { path: PathBuf, row: usize, id: String },
    #[error("{path}: bad magic, expected MEMB1 header or a .csv embedding file")]
    BadMagic { path: PathBuf },
    #[error("{path}: row {row}: expected {expected} components, found {found}")]
    DimensionMismatch {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: truncated file ({detail})")]
    TruncatedFile { path: PathBuf, detail: String },
    #[error("{path}: row {row}: {detail}")]
    Malformed {
        path: PathBuf,
        row: usize,
        detail: String,
    },
    #[error("id list is empty")]
    EmptyInput,
    #[error("split fraction {0} is not in (0, 1)")]
    BadFraction(f64),
    #[error("no id is present in every input table")]
    EmptyIntersection,
    #[error("invalid table: {0}")]
    Invalid(String),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        DataError::Csv {
            path: path.into(),
            source,
        }
    }
}

/// Representation family of a feature space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Bow,
    TextEmbedding,
    ImageEmbedding,
    GrayscaleImageEmbedding,
    Joint,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::Bow,
        FeatureKind::TextEmbedding,
        FeatureKind::ImageEmbedding,
        FeatureKind::GrayscaleImageEmbedding,
        FeatureKind::Joint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Bow => "bow",
            FeatureKind::TextEmbedding => "text_embedding",
            FeatureKind::ImageEmbedding => "image_embedding",
            FeatureKind::GrayscaleImageEmbedding => "grayscale_image_embedding",
            FeatureKind::Joint => "joint",
        }
    }

    /// Whether rows of this space are normalized to unit Euclidean norm
    /// (everything except Bag-of-Words, which is L1-normalized).
    pub fn is_embedding(self) -> bool {
        !matches!(self, FeatureKind::Bow)
    }

    /// Whether the space is derived from captions only.
    pub fn is_text(self) -> bool {
        matches!(self, FeatureKind::Bow | FeatureKind::TextEmbedding)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown feature kind `{s}`"))
    }
}

/// Identity of a feature space: its kind plus a free label naming the
/// upstream encoder (`clip-vit-b32`, `all-MiniLM-L6-v2`, ...).
///
/// The textual form is `kind:label`, e.g. `joint:clip`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSpaceId {
    pub kind: FeatureKind,
    pub source_label: String,
}

impl FeatureSpaceId {
    pub fn new(kind: FeatureKind, source_label: impl Into<String>) -> Self {
        Self {
            kind,
            source_label: source_label.into(),
        }
    }

    /// File-name friendly form of the id.
    pub fn slug(&self) -> String {
        let label: String = self
            .source_label
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        format!("{}__{}", self.kind, label)
    }
}

impl fmt::Display for FeatureSpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.source_label)
    }
}

impl FromStr for FeatureSpaceId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, label) = s.split_once(':').unwrap_or((s, ""));
        Ok(Self::new(kind.parse()?, label))
    }
}

impl Serialize for FeatureSpaceId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureSpaceId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub(crate) fn parse_finite(
    path: &std::path::Path,
    row: usize,
    field: &str,
    raw: &str,
) -> Result<f64, DataError> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::NonFiniteValue {
            path: path.to_path_buf(),
            row,
            field: field.to_string(),
            value: raw.to_string(),
        }),
    }
}
