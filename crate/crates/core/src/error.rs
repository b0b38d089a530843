use thiserror::Error;

/// Errors raised by the library layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied parameter violates a precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A coefficient function produced a non-finite value.
    #[error("evaluation of {what} produced a non-finite value in component {component}")]
    Evaluation { what: String, component: usize },

    #[error("unknown model `{name}`; valid names: {}", valid.join(", "))]
    UnknownModel { name: String, valid: Vec<String> },

    /// A Milstein-type scheme was requested for a problem whose noise did not
    /// pass the commutativity check.
    #[error("problem `{label}` is not validated as commutative (max violation {max_violation:e}); Milstein schemes need commutative noise")]
    NotCommutative { label: String, max_violation: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
