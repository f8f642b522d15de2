use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures talking to a model endpoint.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    /// Connection refused, timeout, reset. Retryable.
    #[error("transport error: {0}")]
    Transport(String),
    /// 5xx from the server. Retryable.
    #[error("server error {status}: {body}")]
    Server { status: u16, body: String },
    /// 4xx from the server. Not retried.
    #[error("request rejected with status {status}: {body}")]
    Rejected { status: u16, body: String },
    /// Retry budget exhausted.
    #[error("backend unavailable after {attempts} attempt(s): {cause}")]
    Unavailable { attempts: u32, cause: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no scripted fixture for request digest {0}")]
    FixtureMiss(String),
    /// The backend cannot provide what the method needs (e.g. logprobs).
    #[error("capability error: {0}")]
    Capability(String),
    #[error("endpoint kind {kind} cannot serve {operation}")]
    WrongKind { kind: String, operation: &'static str },
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Server { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{0} is undefined for these counts")]
    UndefinedMetric(&'static str),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("table is empty")]
    EmptyTable,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// The backend error at the root of this failure, if any.
    pub fn backend_cause(&self) -> Option<&BackendError> {
        match self {
            Error::Backend(e) => Some(e),
            Error::Stage { source, .. } => source.backend_cause(),
            _ => None,
        }
    }
}
