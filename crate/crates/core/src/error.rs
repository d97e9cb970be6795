use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every estimator, calculator and sampler in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("no observations supplied")]
    EmptyData,

    #[error("sample size {n} is below the required minimum {min}")]
    SampleTooSmall { n: usize, min: usize },

    #[error("{0} must be strictly increasing")]
    NotAscending(&'static str),

    #[error("{what} must be positive (found {value} at {at})")]
    NonPositive {
        what: &'static str,
        value: f64,
        at: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid block schedule: {0}")]
    InvalidSchedule(String),

    #[error("block ({k}, {tau}) is outside the cutoff {cutoff}")]
    BlockOutOfRange { k: usize, tau: usize, cutoff: usize },

    #[error("block functional vanishes on block ({k}, {tau})")]
    DegenerateBlock { k: usize, tau: usize },

    #[error("root finder did not converge: {0}")]
    RootFinding(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, lo: f64, hi: f64) -> Self {
        Error::Domain { what, value, lo, hi }
    }
}

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::domain(what, value, 0.0, 1.0))
    }
}
