use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 1 or 2)")]
    UnsupportedDimension(usize),
    #[error("grid too coarse: {0} points per axis (need at least 8)")]
    GridTooCoarse(usize),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("field has {got} values, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("invalid density: {0}")]
    InvalidDensity(&'static str),
    #[error("bandwidth {bandwidth} is below the grid spacing {spacing}")]
    UnderResolved { bandwidth: f64, spacing: f64 },
    #[error("CFL condition violated: courant number {courant} > 1")]
    Cfl { courant: f64 },
    #[error("expected {expected} time slices, got {got}")]
    SliceCount { expected: usize, got: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
    #[error("invalid belief: {0}")]
    InvalidBelief(&'static str),
    #[error("test function must vanish at the horizon")]
    NonVanishingTest,
    #[error("inconsistent observation: no atom matches the observed payments")]
    InconsistentObservation,
    #[error("transport solver failed to reach optimality")]
    TransportFailed,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }
}
