use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rotation axis must be finite and non-zero, got {0:?}")]
    InvalidAxis([f64; 3]),

    #[error("pulse axis cannot be normalized: in-plane error magnitude {0} is not below 1")]
    AxisNormalization(f64),

    #[error("concatenation level {0} out of range 1..=8")]
    LevelOutOfRange(u32),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "integrator norm drift {drift:.3e} on spin {spin} at t = {time:.6e} s exceeds {limit:.1e}; reduce the step size"
    )]
    NormDrift {
        spin: usize,
        drift: f64,
        time: f64,
        limit: f64,
    },

    #[error("cannot parse pulse program line {line}: {reason}")]
    ProgramParse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
