use std::path::PathBuf;

/// Errors produced by the estimation, simulation and I/O routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid {height}x{width} is too small, need at least {min}x{min}")]
    DimensionTooSmall {
        height: usize,
        width: usize,
        min: usize,
    },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("derivative order {order} exceeds the supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("CFL violation: max displacement {displacement:.4} px per step exceeds limit {limit:.4} px")]
    Cfl { displacement: f64, limit: f64 },

    #[error("pressure solve did not converge after {iterations} iterations (residual {residual:.3e}, target {target:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: format error at byte {offset}: {message}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{}: truncated file, expected {expected} bytes but found {actual}", path.display())]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("{}: unsupported format version {found} (supported: {supported})", path.display())]
    UnsupportedVersion {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("configuration error: {0}")]
    Config(String),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters supplied by the caller.
    Usage,
    /// Malformed, missing or inconsistent data.
    Data,
    /// CFL violation, non-convergence or non-finite values.
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) => ErrorKind::Usage,
            Error::Cfl { .. } | Error::NonConvergence { .. } | Error::NonFinite(_) => {
                ErrorKind::Numerical
            }
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
