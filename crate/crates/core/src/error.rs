use thiserror::Error;

/// Errors raised by the solver and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sample count {found} does not match grid size {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("fields live on different mode sets ({0})")]
    IncompatibleFields(String),

    #[error("imaginary residue {residue:e} exceeds threshold {threshold:e}; Hermitian symmetry is broken")]
    BrokenHermitianSymmetry { residue: f64, threshold: f64 },

    #[error("coefficient for mode {0} is not part of the mode set")]
    UnknownMode(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value encountered at t = {time}")]
    BlowUp { time: f64 },

    #[error("base data is zero; nothing to scale")]
    ZeroData,

    #[error("{0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
