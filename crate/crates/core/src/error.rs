use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("strict separation violated: certified gap {gap:.3e} is not positive")]
    SeparationViolation { gap: f64 },

    #[error("point is off the attractor (distance bound {distance:.3e} at depth {depth})")]
    PointOffAttractor { distance: f64, depth: usize },

    #[error("resource budget exceeded: {what} needs {needed}, budget is {budget}")]
    Resource {
        what: &'static str,
        needed: usize,
        budget: usize,
    },

    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    #[error("measures or forms live on different cell trees")]
    TreeMismatch,

    #[error("solver did not converge: {0}")]
    Unconverged(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, past any attached context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit code: 1 internal consistency, 2 invalid input, 3 budget, 4 unconverged.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::InternalConsistency(_) => 1,
            Error::Resource { .. } => 3,
            Error::Unconverged(_) => 4,
            _ => 2,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
