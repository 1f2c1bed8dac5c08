//! Feature matrices for every feature space.
//!
//! Bag-of-Words rows are count vectors over a training vocabulary divided by
//! their component sum. Embedding rows (text, image, grayscale image) are
//! divided by their Euclidean norm. Joint rows add the unit image embedding to
//! the unit text embedding and rescale the sum to unit norm.

mod matrix;
mod normalize;
mod tokenize;
mod vocab;

use std::path::PathBuf;

pub use matrix::{assemble_matrix, FeatureMatrix};
pub use normalize::{bow_vectorize, fuse_joint, l1_normalize, l2_normalize, FeatureVector, Normalized};
pub use tokenize::{tokenize, Tokenizer, BUNDLED_STOPWORDS};
pub use vocab::{build_vocabulary, read_vocabulary, write_vocabulary, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("input contains a non-finite value at position {0}")]
    NonFiniteInput(usize),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("image and text embeddings cancel out (antipodal after normalization)")]
    DegenerateSum,
    #[error("no token reaches min_count = {min_count}")]
    EmptyVocabulary { min_count: usize },
    #[error("min_count must be at least 1")]
    BadMinCount,
    #[error("missing input for {space}: {what}")]
    MissingInput { space: String, what: String },
    #[error("row `{id}`: {source}")]
    Row {
        id: String,
        #[source]
        source: Box<FeatureError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed vocabulary file: {detail}")]
    MalformedVocabulary { path: PathBuf, detail: String },
}
