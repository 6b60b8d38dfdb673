use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution{}: {reason}", location(.row))]
    InvalidDistribution { row: Option<usize>, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("conditional row {0} is undefined (conditioning symbol has zero probability)")]
    UndefinedRow(usize),

    #[error("indeterminate extended-real arithmetic: -inf - (-inf) in {0}")]
    Indeterminate(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("marginal mismatch: {0}")]
    MarginalMismatch(String),

    #[error("enumeration budget exceeded: {needed} points requested, cap is {cap}")]
    BudgetExceeded { needed: f64, cap: f64 },

    #[error("refusing to certify: {0}")]
    CertificationRefused(String),

    #[error("membership check failed: {0}")]
    NotMember(String),

    #[error("linear program internal error: {0}")]
    Lp(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn location(row: &Option<usize>) -> String {
    match row {
        Some(r) => format!(" at row {r}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
