use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Parametric drive strong enough to remove the damping of a quadrature.
    #[error("parametric instability: {0}")]
    Unstable(String),

    #[error("no modulation: histogram is consistent with a flat distribution")]
    NoModulation,

    #[error("degenerate regression: {0}")]
    Degenerate(String),

    #[error("lock criterion not bracketed: every grid point is {}", if *.all_above { "above" } else { "below" })]
    Unbracketed { all_above: bool },

    #[error("histogram binning mismatch: {0}")]
    BinningMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("run record checksum mismatch")]
    Checksum,

    #[error("unsupported schema version {found} (expected {expected})")]
    Schema { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {value}")))
    }
}
