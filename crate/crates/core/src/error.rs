use thiserror::Error;

use crate::lang::{RuntimeError, Var};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by parsing, configuration and analysis.
///
/// A rejected program is not an error: rejection is reported through
/// [`crate::typecheck::CheckReport`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("{line}:{col}: `{name}` uses the reserved copy separator `@`")]
    ReservedName { line: usize, col: usize, name: String },

    #[error("lattice error: {0}")]
    Lattice(String),

    #[error("unknown security level `{0}`")]
    UnknownLevel(String),

    #[error("no label for variable `{0}` and no default rule")]
    MissingLabel(Var),

    #[error("unbound variable `{0}`")]
    Unbound(Var),

    #[error("malformed variable name `{0}`")]
    MalformedName(String),

    #[error("runtime error: {0}")]
    Runtime(#[from] RuntimeError),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("internal error: {0}")]
    Internal(String),
}
