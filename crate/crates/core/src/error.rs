use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no HE11 root found: {0}")]
    NoRoot(String),

    #[error("surface intensity scan is empty: no diameter supports a guided mode")]
    EmptyScan,

    #[error("grid too coarse: {0}")]
    GridResolution(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("readout window is empty or outside the simulated span")]
    EmptyWindow,

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid fit problem: {0}")]
    FitProblem(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("parameter `{key}`: {reason}")]
    Override { key: String, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Data(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
