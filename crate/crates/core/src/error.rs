use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wave vector {0:?} is not in the half-space Z3+")]
    InvalidWaveVector([i32; 3]),

    #[error("polarization index {0} outside 1..=4")]
    InvalidPolarization(u8),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("grid of size {size} cannot resolve modes up to |k| = {n} (need at least {required})")]
    UnderResolved { size: usize, n: u32, required: usize },

    #[error("fields live on different tori")]
    GeometryMismatch,

    #[error("mode {0:?} lies outside the Galerkin truncation")]
    ModeOutsideTruncation([i32; 3]),

    #[error("viscosity profile violates hypothesis `{hypothesis}`: {detail}")]
    Profile { hypothesis: &'static str, detail: String },

    #[error("negative argument {0} passed to the viscosity law")]
    NegativeArgument(f64),

    #[error("invalid noise specification: {0}")]
    Noise(String),

    #[error("time grids misaligned: {0}")]
    MisalignedPath(String),

    #[error("invalid simulation config: {0}")]
    Config(String),

    #[error("state became non-finite at t = {time} (step {step})")]
    NonFinite { time: f64, step: u64 },

    #[error("unknown inequality `{0}`")]
    UnknownInequality(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config {path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
