use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument violated a documented precondition (empty grid, bad horizon, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A function was evaluated outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation left the range supported by the implementation.
    #[error("range error: {0}")]
    Range(String),

    /// A user-supplied coefficient returned a non-finite value.
    #[error("evaluation error: {what} at {point}")]
    Evaluation { what: String, point: String },

    /// A quadrature or classification routine could not reach its tolerance.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A theorem hypothesis required by the operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A path simulation produced a non-finite state.
    #[error("simulation error at step {step}: {what}")]
    Simulation { step: usize, what: String },
}

pub type Result<T> = std::result::Result<T, Error>;
