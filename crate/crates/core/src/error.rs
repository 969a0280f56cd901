use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LqeError {
    /// An argument or input value outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// An operation was called on an object in the wrong state.
    #[error("state error: {0}")]
    State(String),
    /// Malformed input data; `line` is 1-based when known.
    #[error("data error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data {
        line: Option<usize>,
        message: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl LqeError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        LqeError::Domain(msg.into())
    }

    pub(crate) fn data(line: Option<usize>, msg: impl Into<String>) -> Self {
        LqeError::Data {
            line,
            message: msg.into(),
        }
    }
}

impl From<std::io::Error> for LqeError {
    fn from(e: std::io::Error) -> Self {
        LqeError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LqeError>;
