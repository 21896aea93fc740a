use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Inputs violate a structural precondition (wrong period, wrong arm, ...).
    #[error("structural error: {0}")]
    Structural(String),

    /// No pairing satisfies the declared constraints.
    #[error("infeasible: no pairs satisfy {constraint} ({detail})")]
    Infeasible { constraint: String, detail: String },

    /// Every adjusted contrast is zero, so there is nothing to test.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A parameter lies outside the domain of a mapping.
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// No informative (eligible) quadruples remain.
    #[error("no information: {0}")]
    NoInformation(String),

    #[error("outcome kind mismatch: {0}")]
    OutcomeKind(String),

    /// The declared balance specification is malformed or refers to
    /// covariates the data do not carry.
    #[error("balance specification: {0}")]
    Spec(String),
}
