//! Moral rating inference for images.
//!
//! The crate is split the same way the pipeline runs:
//!
//! - [`datamodel`]: on-disk artifacts (ratings, captions, embeddings, corpus
//!   metadata, split files) and the join that turns them into a [`Dataset`].
//! - [`features`]: Bag-of-Words featurization, embedding normalization and the
//!   additive image-text fusion, assembled into a [`FeatureMatrix`].
//! - [`regression`]: closed-form ridge regression, repeated k-fold grid search,
//!   R² metrics and model persistence.
//! - [`analysis`]: scoring an unlabeled corpus and the group-level statistics
//!   (means with SEM, region by year cells, foundation profiles, bootstrap tests).

pub mod analysis;
pub mod datamodel;
pub mod features;
pub mod numeric;
pub mod regression;
pub mod seed;

pub use datamodel::{
    CaptionTable, CorpusRecord, Dataset, EmbeddingTable, FeatureKind, FeatureSpaceId, RatingsTable,
    SplitAssignment, TargetVector,
};

/// The six predicted moral variables, in canonical column order.
pub const CANONICAL_TARGETS: [&str; 6] = ["morality", "authority", "fairness", "care", "ingroup", "purity"];

/// Optional extra targets that may follow the canonical ones in a ratings file.
pub const EXTRA_TARGETS: [&str; 2] = ["valence", "arousal"];

/// The five foundation-relevance targets (every canonical target but morality).
pub const FOUNDATIONS: [&str; 5] = ["authority", "fairness", "care", "ingroup", "purity"];
pub use features::{FeatureMatrix, Vocabulary};
pub use regression::{CvConfig, CvReport, RidgeModel};
