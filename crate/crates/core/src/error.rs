use thiserror::Error;

/// Errors produced by the estimation, scheduling and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("{name} is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { name: &'static str, min_eigenvalue: f64 },

    #[error("{name} is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPd { name: &'static str, min_eigenvalue: f64 },

    #[error("(A, C) is not observable: observability matrix rank {rank} < {dim}")]
    NotObservable { rank: usize, dim: usize },

    #[error("(A, Q^1/2) is not controllable: controllability matrix rank {rank} < {dim}")]
    NotControllable { rank: usize, dim: usize },

    #[error("{what} did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error(
        "infeasible action {action} at battery {available} (condition {condition}, rung {rung})"
    )]
    InfeasibleAction {
        action: u32,
        available: u32,
        condition: char,
        rung: usize,
    },

    #[error("instance too large for enumeration: {count} policies exceed limit {limit}")]
    TooLarge { count: f64, limit: usize },

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
