use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A requested occupation does not fit under the mode's photon cutoff.
    #[error("occupation {occupation} exceeds cutoff of mode {mode} (dimension {dim})")]
    CutoffExceeded {
        mode: usize,
        occupation: usize,
        dim: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (trace {0})")]
    NotNormalized(f64),

    #[error("unsupported dimension {0}: only m = 2 mutually unbiased bases are available")]
    UnsupportedDimension(usize),

    #[error("thermal truncation defect {defect:e} exceeds tolerance at cutoff {cutoff}")]
    CutoffTooSmall { cutoff: usize, defect: f64 },

    /// A runtime consistency check on a computed object failed.
    #[error("numerical integrity failure: {0}")]
    Integrity(String),

    #[error("fixture parse error: {0}")]
    Fixture(String),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
