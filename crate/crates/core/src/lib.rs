//! Region-constrained semantic image ranking.
//!
//! Images are indexed as sets of sub-regions, each a normalized rectangle
//! with an embedding. A query pairs an embedding with a rectangle; ranking
//! fuses cosine distance with a rectangle distance to that query rectangle.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the HTTP service live in the `subsearch` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

use alloc::string::String;

pub mod collection;
pub mod embeddings;
pub mod eval;
pub mod geometry;
pub mod metrics;
pub mod ranking;
pub mod rng;
pub mod stats;

pub use collection::{
    candidate_regions, static_grid_5, uniform_grid, CandidateMode, ImageRecord, IndexedCollection,
    RegionRecord, RegionSource,
};
pub use embeddings::{cosine_similarity, l2_normalize, semantic_distance, EmbeddingVector};
pub use eval::{
    diagnostics, evaluate, perturbation_sweep, Annotation, Diagnostics, EvalReport, EvalReports,
    QueryOutcome, Subset, SweepCell, SweepSpec, TextField,
};
pub use geometry::{perturb_rect, PerturbationConfig, Rect};
pub use ranking::{
    rank_images, standardize, theoretical_rank, DistanceKind, Fusion, RankedEntry, RankedList,
    RankingConfig, Scores,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid rectangle ({left}, {top}, {width}, {height})")]
    InvalidRect {
        left: f64,
        top: f64,
        width: f64,
        height: f64,
    },
    #[error("frame dimensions must be positive")]
    InvalidFrameSize,
    #[error("invalid perturbation sigma {0}")]
    InvalidSigma(f64),
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("invalid grid {rows}x{cols}")]
    InvalidGrid { rows: usize, cols: usize },
    #[error("degenerate embedding")]
    DegenerateEmbedding,
    #[error("non-finite embedding value")]
    NonFiniteEmbedding,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("row-count mismatch: expected {expected}, found {found}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("dangling embedding row {row} (matrix has {rows} rows)")]
    DanglingRow { row: usize, rows: usize },
    #[error("embedding row {0} is not unit-norm")]
    UnnormalizedRow(usize),
    #[error("duplicate image id {0:?}")]
    DuplicateImage(String),
    #[error("duplicate region id {region_id:?} in image {image_id:?}")]
    DuplicateRegion { image_id: String, region_id: String },
    #[error("collection is empty")]
    EmptyCollection,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("unknown image {0:?}")]
    UnknownImage(String),
    #[error("annotation {0:?} has no embedding for the requested text field")]
    MissingEmbedding(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("zero variance")]
    DegenerateVariance,
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("unknown {kind} {name:?}")]
    UnknownName { kind: &'static str, name: String },
}
