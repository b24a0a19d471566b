use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the model's domain, e.g. coincident target and sensor.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("divergence: {0}")]
    Divergence(String),
    /// Failure inside an iterative run, with the iteration (and sensor) it happened at.
    #[error("iteration {iteration}{}: {source}", sensor_suffix(.sensor))]
    Iteration {
        iteration: usize,
        sensor: Option<usize>,
        #[source]
        source: Box<Error>,
    },
    #[error("{failures} of {trials} trials failed for {algorithm} (first failure: {first})")]
    TooManyFailures {
        algorithm: String,
        failures: usize,
        trials: usize,
        first: String,
    },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn sensor_suffix(sensor: &Option<usize>) -> String {
    match sensor {
        Some(i) => format!(", sensor {i}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn at(self, iteration: usize, sensor: Option<usize>) -> Self {
        Error::Iteration {
            iteration,
            sensor,
            source: Box::new(self),
        }
    }

    /// True for configuration problems (as opposed to failures while running).
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_))
    }
}
