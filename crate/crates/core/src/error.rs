use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("site {site} out of range for a chain of {n} sites")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("orthogonality center is {center:?}, expected it on site {expected} or {}", expected + 1)]
    CenterNotAtGate {
        center: Option<usize>,
        expected: usize,
    },

    #[error("subsystem of {len} sites exceeds the cap of {cap}")]
    SubsystemTooLarge { len: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("exact diagonalization is capped at {cap} sites, got {n}")]
    OracleCapExceeded { n: usize, cap: usize },

    #[error("separation {delta} is not a multiple of the record spacing {spacing}")]
    OffGrid { delta: f64, spacing: f64 },

    #[error("subsystem size {0} was not recorded")]
    NotRecorded(usize),

    #[error("series too short: need at least {need} samples, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;
