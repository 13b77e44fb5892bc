//! Benchmarking toolkit for clustering validity indexes.
//!
//! The crate covers the full loop of a validity-index benchmark:
//! synthetic dataset generation with controlled geometry ([`datagen`]),
//! candidate partition production via K-Means and agglomerative linkage
//! ([`clustering`]), internal validity indexes with noise adjustment
//! ([`internal`]), external indexes and their rank aggregation
//! ([`external`]), supervised partition generation with construction-order
//! reference rankings ([`supervised`]), the three evaluation scenarios
//! ([`evaluation`]) and the nonparametric statistics used to compare
//! indexes ([`stats`]).

pub mod clustering;
pub mod datagen;
pub mod evaluation;
pub mod external;
pub mod internal;
pub mod io;
pub mod model;
mod seed;
pub mod stats;
pub mod supervised;

pub use model::{
    average_ranks, canonical_form, compute_distance_matrix, CompactnessLevel, Dataset,
    DistanceMatrix, Distribution, GroundTruth, Label, Orientation, Partition,
    PartitionCollection, PropertyTags, NOISE,
};
pub use seed::derive_seed;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("overlap target unattainable after {retries} attempts ({config})")]
    OverlapUnattainable { retries: usize, config: String },
    #[error("index undefined: {0}")]
    IndexUndefined(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("dataset skipped: {0}")]
    Skipped(String),
    #[error("singular covariance: {0}")]
    SingularCovariance(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("malformed artifact {path}: {detail}")]
    MalformedArtifact { path: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
