use thiserror::Error;

/// Errors produced by the solvers, mechanisms and instance I/O.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("instance has no objective vector")]
    MissingObjective,

    #[error("no guess in [{lo}, {hi}] was declared feasible")]
    NoFeasibleGuess { lo: f64, hi: f64 },

    #[error("privacy budget exhausted: plan covers {planned} charges")]
    BudgetExhausted { planned: usize },

    #[error("measure has {support} positive weights, fewer than the density parameter {s}")]
    SupportTooSmall { support: usize, s: usize },

    #[error("oracle returned a point outside the public region: {0}")]
    OracleOutsideRegion(String),

    #[error("oracle violated its width bound: |b_i - A_i x| = {observed} > rho = {rho}")]
    OracleWidthBreach { observed: f64, rho: f64 },

    #[error("oracle is not applicable: {0}")]
    OracleMismatch(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("accuracy bound is vacuous: fixed point alpha = {alpha} is not below 1")]
    VacuousBound { alpha: f64 },

    #[error("sensitivity model mismatch: {0}")]
    ModelMismatch(String),

    #[error("unbalanced database: {zeros} zeros out of {n}")]
    Unbalanced { zeros: usize, n: usize },

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("instance parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
