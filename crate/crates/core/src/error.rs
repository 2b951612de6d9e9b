use thiserror::Error;

/// Failures raised across the estimation pipeline.
///
/// Divergences at a critical point are not errors: operations that can hit
/// one return an `f64::INFINITY` sentinel together with a flag instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("phase error: {0}")]
    Phase(String),

    #[error("unstable drift: {0}")]
    Stability(String),

    #[error("Fock truncation insufficient: tail mass {tail:e} exceeds {limit:e} at dim {dim}")]
    Truncation { tail: f64, limit: f64, dim: usize },

    #[error("finite-difference step failed: {0}")]
    Step(String),

    #[error("moment order {required} exceeds engine limit {max_order}")]
    Order { required: usize, max_order: usize },

    #[error("decoupling relation needs 3 or 4 operators, got {0}")]
    Arity(usize),

    #[error("epsilon ladder did not converge: {0}")]
    Convergence(String),

    #[error("config error{}: {message}", location(*.line, .field.as_deref()))]
    Config {
        line: Option<usize>,
        field: Option<String>,
        message: String,
    },
}

fn location(line: Option<usize>, field: Option<&str>) -> String {
    match (line, field) {
        (Some(l), Some(f)) => format!(" at line {l}, field `{f}`"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(f)) => format!(" in field `{f}`"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            field: Some(field.into()),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
