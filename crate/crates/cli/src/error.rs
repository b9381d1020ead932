use std::fmt::Display;

use thiserror::Error;

/// Failures split by exit status: bad input or usage exits 1, everything
/// else exits 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    pub fn user(msg: impl Display) -> Self {
        CliError::User(msg.to_string())
    }

    pub fn internal(msg: impl Display) -> Self {
        CliError::Internal(msg.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags a fallible input step as a user error with context.
pub trait UserContext<T> {
    fn user_ctx(self, what: impl Display) -> CliResult<T>;
}

impl<T, E: Display> UserContext<T> for Result<T, E> {
    fn user_ctx(self, what: impl Display) -> CliResult<T> {
        self.map_err(|e| CliError::User(format!("{what}: {e}")))
    }
}

/// Tags a fallible output step as an internal error with context.
pub trait InternalContext<T> {
    fn internal_ctx(self, what: impl Display) -> CliResult<T>;
}

impl<T, E: Display> InternalContext<T> for Result<T, E> {
    fn internal_ctx(self, what: impl Display) -> CliResult<T> {
        self.map_err(|e| CliError::Internal(format!("{what}: {e}")))
    }
}
