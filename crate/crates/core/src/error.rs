use thiserror::Error;

/// Errors raised by the library.
///
/// The variants map onto three families that callers (the CLI in particular)
/// treat differently: bad input or preconditions ([`Error::Usage`]), numerical
/// breakdown of an otherwise valid computation ([`Error::Numeric`],
/// [`Error::SingularScatter`], [`Error::DegenerateVariance`]) and matrices that
/// fail the SPD contract ([`Error::NotSpd`]).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("singular scatter matrix: {which} has reciprocal condition number {rcond:.3e} (log-determinant {logdet:.6})")]
    SingularScatter { which: &'static str, rcond: f64, logdet: f64 },

    #[error("degenerate within-group variance: group {group} has sigma^2 = {value:.3e}")]
    DegenerateVariance { group: usize, value: f64 },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// `true` for errors caused by invalid input rather than numerical breakdown.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
