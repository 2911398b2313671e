//! Detection and classification of multilingual text lines in images.
//!
//! The pipeline turns an image into character candidates (blobs), attaches a
//! per-category likelihood to each blob, and then groups blobs into text lines
//! by minimizing a hierarchical MDL energy: per-blob data costs (classification
//! plus geometric error against a line pair) plus label costs paid once per
//! active line model and once per active language. The energy is minimized by
//! block-coordinate descent over a sampled pool of line models, where the
//! labeling step merges candidate labelings through globally optimal fusion
//! moves solved by min-cut.
//!
//! Module map:
//!
//! - [`types`] — blobs, line models, labelings, parameters, JSON schemas.
//! - [`imaging`] — PGM ingestion, Sobel edge maps, connected components, merge
//!   proposals for over-segmented characters.
//! - [`classify`] — feature extraction and multi-category boosted classification.
//! - [`energy`] — data terms, geometric error, and the total hierarchical energy.
//! - [`proposals`] — Delaunay neighbor graph and the initial model pool.
//! - [`maxflow`] — exact s-t max-flow / min-cut solver.
//! - [`fusion`] — binary crossover energy, its min-cut reduction, and the
//!   model-assignment sweep.
//! - [`refit`] — least-squares re-estimation of line parameters and language.
//! - [`pearl`] — the top-level sample / assign / refit driver.
//! - [`synth`] — synthetic multilingual scene generator with ground truth.
//! - [`evalm`] — line-level precision/recall/F scoring against ground truth.

pub mod classify;
pub mod energy;
pub mod evalm;
pub mod fusion;
pub mod imaging;
pub mod maxflow;
pub mod pearl;
pub mod proposals;
pub mod refit;
pub mod synth;
pub mod types;

pub use types::{
    BlobBox, BlobId, Category, EnergyParams, Labeling, Language, Line, LineModel, ModelId, Point2D,
    TextCandidate,
};

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate likelihood")]
    DegenerateLikelihood,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("pgm: {0}")]
    Pgm(String),
    #[error("image {0}x{1} smaller than 3x3 kernel")]
    ImageTooSmall(usize, usize),
    #[error("degenerate box")]
    DegenerateBox,
    #[error("degenerate abscissae")]
    DegenerateAbscissae,
    #[error("unknown model id {0}")]
    UnknownModel(types::ModelId),
    #[error("unbounded cut")]
    UnboundedCut,
    #[error("need at least two blobs")]
    TooFewBlobs,
    #[error("mismatched blob sets")]
    MismatchedBlobs,
    #[error("scene placement failed after {0} attempts")]
    PlacementFailed(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
