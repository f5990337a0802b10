use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rate at index {index} is {value}, rates must be strictly positive and finite")]
    NonPositiveRate { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "state left the unit cube at t = {time} (excursion {excursion:e}) even with step {step:e}"
    )]
    StepSize {
        time: f64,
        step: f64,
        excursion: f64,
    },

    #[error("no sign change of the {what} residual in [{lo}, {hi}]")]
    Bracket {
        what: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("recursion diverged at index {index} (value {value:e})")]
    Diverged { index: usize, value: f64 },

    #[error("{0}")]
    Numerical(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
