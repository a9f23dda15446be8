use thiserror::Error;

/// Errors produced by bound calculators, verifiers and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{name} = {value} is out of domain: expected {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A solved quantity does not fit the target integer type.
    #[error("{what} overflows: {value:e} exceeds {limit}")]
    Overflow {
        what: &'static str,
        value: f64,
        limit: u64,
    },

    /// A check's documented precondition does not hold for the given input.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// `n_paths * T` is larger than the configured draw budget.
    #[error("simulation budget exceeded: {requested} draws requested, budget is {budget}")]
    Budget { requested: u128, budget: u64 },

    /// The requested statistic is undefined for this input.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }

    /// Name of the offending argument for domain errors.
    pub fn argument(&self) -> Option<&'static str> {
        match self {
            Error::Domain { name, .. } => Some(name),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("delta", delta, "0 < delta < 1"))
    }
}

pub(crate) fn check_horizon(horizon: u64) -> Result<()> {
    if horizon >= 1 {
        Ok(())
    } else {
        Err(Error::domain("T", horizon as f64, "T >= 1"))
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, value, "a finite value > 0"))
    }
}

pub(crate) fn check_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, value, "a finite value >= 0"))
    }
}
