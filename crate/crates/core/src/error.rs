use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid axis: {0}")]
    InvalidAxis(String),

    #[error("region [{lo}, {hi}] overflows the grid extent [{start}, {end}] on axis {axis}")]
    DomainOverflow {
        axis: usize,
        lo: f64,
        hi: f64,
        start: f64,
        end: f64,
    },

    #[error("invalid exponent {0}: must satisfy 1 <= p <= inf")]
    InvalidExponent(f64),

    #[error("degenerate space: {0}")]
    DegenerateSpace(String),

    #[error("coefficient convention violated: nonzero coefficient at inactive index {0:?}")]
    ConventionViolation((usize, usize, usize)),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("point ({0}, {1}) lies outside the domain")]
    OutOfDomain(f64, f64),

    #[error("sampling mode error: {0}")]
    Mode(String),

    #[error("sample matrix is not injective (sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e})")]
    NotInjective { sigma_min: f64, sigma_max: f64 },

    #[error("layout mismatch: expected {expected} entries, got {got}")]
    Layout { expected: usize, got: usize },

    #[error("unsupported B-spline order {0} (expected 0..=3)")]
    UnsupportedOrder(u32),

    #[error("invalid shift system: {0}")]
    Shift(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("trial {index}: {source}")]
    Trial { index: usize, source: Box<Error> },
}

impl Error {
    /// True for errors caused by invalid input rather than by a run.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::NotInjective { .. } | Error::DegenerateSpace(_) => false,
            Error::Trial { source, .. } => source.is_validation(),
            _ => true,
        }
    }
}
