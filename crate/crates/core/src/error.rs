use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid slice pose: {0}")]
    InvalidPose(String),
    #[error("invalid region of interest: {0}")]
    InvalidRoi(String),
    #[error("line is {distance_mm} mm off the slice plane")]
    LineNotInPlane { distance_mm: f64 },
    #[error("only {found} valid samples, at least 2 are needed")]
    TooFewSamples { found: usize },
    #[error("slices are not near-parallel ({angle_deg:.3} degrees between normals)")]
    NotParallel { angle_deg: f64 },

    #[error("input has zero standard deviation")]
    ZeroVariance,
    #[error("shape mismatch: {left} vs {right} elements")]
    ShapeMismatch { left: usize, right: usize },
    #[error("alignment problem has no cost terms")]
    NoCostTerms,
    #[error("every alignment cost term is degenerate")]
    AllTermsDegenerate,
    #[error("expected {expected} positions, got {found}")]
    WrongPositionCount { expected: usize, found: usize },

    #[error("histogram input is empty")]
    EmptyInput,
    #[error("histogram input has zero intensity range")]
    ZeroRange,
    #[error("need at least {min} bins, got {found}")]
    TooFewBins { min: usize, found: usize },
    #[error("intensity distribution is not bimodal: {0}")]
    NonBimodal(String),
    #[error("mixture components do not intersect between their modes")]
    NoIntersection,

    #[error("no contour for SA slice {slice}")]
    MissingContour { slice: usize },
    #[error("region enclosed by the contour of slice {slice} is empty")]
    EmptyRegion { slice: usize },
    #[error("no blood-pool pixels at or above threshold on slice {slice}")]
    EmptyBloodPool { slice: usize },
    #[error("malformed polygon: {0}")]
    MalformedPolygon(String),

    #[error("myocardium mask is empty")]
    EmptyMask,
    #[error("need at least 3 SA slices for the segment model, got {found}")]
    TooFewSlices { found: usize },
    #[error("myocardium mask of slice {slice} is empty")]
    EmptySliceMask { slice: usize },

    #[error("need at least 2 pairs, got {found}")]
    TooFewPairs { found: usize },

    #[error("invalid phantom configuration: {0}")]
    InvalidPhantom(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: pixel file holds {found} values, manifest says {expected}")]
    DimensionMismatch { path: PathBuf, expected: usize, found: usize },
    #[error("slice {index}: image orientation is not orthonormal ({detail})")]
    NonOrthonormal { index: usize, detail: String },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse { path: path.into(), message: message.to_string() }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }
}
