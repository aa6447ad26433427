//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimension must be 2 or 3, got {0}")]
    BadDim(usize),

    #[error("nodes per axis must be odd and >= 9, got {0}")]
    BadGridSize(usize),

    #[error("grid mismatch between fields")]
    GridMismatch,

    #[error("field role mismatch: expected {expected}, got {got}")]
    RoleMismatch { expected: &'static str, got: &'static str },

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("state field is negative at node {0}")]
    NegativeState(usize),

    #[error("state field is nonzero at node {0} outside the unit ball")]
    StateOutsideBall(usize),

    #[error("empty domain")]
    EmptyDomain,

    #[error("radius out of range: {0}")]
    RadiusOutOfRange(f64),

    #[error("bad magic: expected FLD1 header")]
    BadMagic,

    #[error("size mismatch: expected {expected} bytes of payload, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("malformed header: {0}")]
    BadHeader(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("domain too thin for kappa estimate")]
    DomainTooThin,

    #[error("resolution too coarse: no admissible sample")]
    ResolutionTooCoarse,

    #[error("solver did not converge: residual {residual:.3e} after {sweeps} sweeps")]
    NotConverged { residual: f64, sweeps: usize },

    #[error("ball of radius {r} at node {center} is not contained in the domain")]
    BallNotInside { center: usize, r: f64 },

    #[error("improvement ratio {achieved:.4} below required {required:.4}")]
    NoImprovement { achieved: f64, required: f64 },

    #[error("nonpositive value {value:.3e} at node {node}")]
    NonPositive { node: usize, value: f64 },

    #[error("seed node is below the truncation level")]
    SeedBelowLevel,

    #[error("supports overlap at node {0}")]
    OverlappingSupports(usize),

    #[error("degenerate profile: Phi vanishes at r = {0}")]
    DegenerateProfile(f64),

    #[error("fit needs at least {required} points, got {got}")]
    DegenerateFit { required: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config error at {key}: {message}")]
    Config { key: String, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
