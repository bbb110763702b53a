use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cutoff frequency must be positive, got {0}")]
    NonPositiveCutoff(f64),

    #[error("phase velocity is infinite at k = 0")]
    InfinitePhaseVelocity,

    #[error("velocity {velocity} is not below the speed of light {c}")]
    Superluminal { velocity: f64, c: f64 },

    #[error("guide geometry undefined at x = {x}: ω₀ + V/ħ = {cutoff} is not positive")]
    GeometryUndefined { x: f64, cutoff: f64 },

    #[error("frequency {omega} is below the local cutoff {cutoff} at x = {x}")]
    BelowCutoff { x: f64, omega: f64, cutoff: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no propagating channel in the {side} lead at ω = {omega}")]
    NoPropagatingChannel { side: &'static str, omega: f64 },

    #[error("root not bracketed: {0}")]
    RootNotBracketed(String),

    #[error("classically allowed region is empty")]
    EmptyAllowedRegion,

    #[error("grid under-resolves the field: {0}")]
    Unresolved(String),

    #[error("time step {dt} violates the stability limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("profile is not confining: state energy {energy} reaches the boundary potential {boundary}")]
    NonConfining { energy: f64, boundary: f64 },

    #[error("{0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.kind() {
            csv::ErrorKind::Io(_) => Error::Io(err.to_string()),
            _ => Error::Parse(err.to_string()),
        }
    }
}
