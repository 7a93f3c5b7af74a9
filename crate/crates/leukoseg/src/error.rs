//! Crate-wide error type.

use std::path::PathBuf;

/// Pipeline stage used for error attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Stage 1: semantic masking via CMYK thresholding.
    Semantic,
    /// Stage 2: k-means clustering and role resolution.
    Clustering,
    /// Stage 3: watershed instance separation.
    Instances,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Semantic => write!(f, "stage 1 (semantic)"),
            Stage::Clustering => write!(f, "stage 2 (clustering)"),
            Stage::Instances => write!(f, "stage 3 (instances)"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(PathBuf),

    #[error("corrupt image stream in {path}: {detail}")]
    CorruptStream { path: PathBuf, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("expected {expected} channel(s), image has {actual}")]
    WrongChannelCount { expected: u8, actual: u8 },

    #[error("dimension mismatch: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: u32,
        a_height: u32,
        b_width: u32,
        b_height: u32,
    },

    #[error("invalid raster geometry: {0}")]
    InvalidGeometry(String),

    #[error("sample {value} outside [0,1]")]
    OutOfRangeSample { value: f64 },

    #[error("non-finite sample in float plane")]
    NonFiniteSample,

    #[error("label {0} exceeds the 16-bit range of the label-map file format")]
    LabelOverflow(u32),

    #[error("invalid percentile order: low {low} must be < high {high}, both in [0,1]")]
    InvalidPercentiles { low: f64, high: f64 },

    #[error("clustering domain is empty")]
    EmptyDomain,

    #[error("domain has {found} distinct value(s) but k = {needed}")]
    TooFewDistinctValues { needed: usize, found: usize },

    #[error("role resolution requires k = 3 clusters, outcome has k = {0}")]
    KNotThree(usize),

    #[error("semantic mask is empty")]
    EmptySemanticMask,

    #[error("watershed requires at least one seed")]
    EmptySeeds,

    #[error("seed pixel at ({x},{y}) lies outside the flooding domain")]
    SeedOutsideDomain { x: u32, y: u32 },

    #[error("no watershed seeds found (empty or pathological slide)")]
    NoSeedsFound,

    #[error("could not place {unplaced} of {requested} cells after {retries} retries")]
    CellsDoNotFit {
        requested: usize,
        unplaced: usize,
        retries: usize,
    },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The stage attributed to this error, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
