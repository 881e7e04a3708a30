use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signed index {index} out of range for depth p = {p}")]
    IndexOutOfRange { index: i64, p: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid angles: {0}")]
    InvalidAngles(String),

    #[error("depth p = {p} exceeds the configured cap of {cap}")]
    DepthOverCap { p: usize, cap: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("site vector {site} is not normalized (norm {norm})")]
    Unnormalized { site: usize, norm: f64 },

    #[error("truncation collapsed a state at layer {layer} (kept {retained:.3e} of its norm²); the SVD cutoff is too aggressive")]
    TruncationCollapse { layer: usize, retained: f64 },

    #[error("Gram matrix lost positive semidefiniteness at layer {layer} (diagonal argument {value:.3e})")]
    PsdLoss { layer: usize, value: f64 },

    #[error("near-singular leading block at layer {layer}, row {row}")]
    NearSingular { layer: usize, row: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("evaluator failed at evaluation {eval}: {source}")]
    Evaluator {
        eval: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics themselves (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite(_)
            | Error::TruncationCollapse { .. }
            | Error::PsdLoss { .. }
            | Error::NearSingular { .. }
            | Error::NonConvergence(_) => true,
            Error::Evaluator { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
