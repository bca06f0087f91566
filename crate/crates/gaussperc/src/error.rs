use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("tabulated kernels support value and gradient only (requested {requested})")]
    UnsupportedOrder { requested: &'static str },

    #[error("radius {radius} is outside the tabulated profile range [0, {max_radius}]")]
    RadiusOutOfRange { radius: f64, max_radius: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "circulant embedding failed: clipped negative eigenvalue mass {neg_mass:.3e} exceeds \
         {tolerance:.3e} of the positive mass (most negative eigenvalue {most_negative:.3e}); \
         retry with a padding factor of {suggested_padding}"
    )]
    EmbeddingFailure {
        neg_mass: f64,
        tolerance: f64,
        most_negative: f64,
        suggested_padding: usize,
    },

    #[error("samples live on mismatched grids")]
    GridMismatch,

    #[error("mask inclusion violated at vertex {witness:?}: low mask is set, high mask is not")]
    NotASubset { witness: Vec<usize> },

    #[error("boundary shell at L = {l} does not fit inside the grid")]
    ShellExceedsGrid { l: f64 },

    #[error("grid is not cubic: {0}")]
    NotCubic(String),

    #[error("ball of radius {radius} at {center:?} needs a margin of {radius} inside the grid")]
    MarginViolation { center: Vec<f64>, radius: f64 },

    #[error("need at least {min} samples for a stable quantile, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("shift amplitude M + level = {m_plus_level} is negative; raise M or the level")]
    NegativeAmplitude { m_plus_level: f64 },

    #[error("shift lower bound violated at vertex {vertex:?}: h = {value}, required >= {required}")]
    ShiftBoundViolation {
        vertex: Vec<usize>,
        value: f64,
        required: f64,
    },

    #[error(
        "bisection bracket [{lo}, {hi}] does not straddle the 1/2 crossing probability \
         (p(lo) = {p_lo:.3}, p(hi) = {p_hi:.3})"
    )]
    NonBracketing {
        lo: f64,
        hi: f64,
        p_lo: f64,
        p_hi: f64,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
