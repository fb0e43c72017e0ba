//! Information-flow checking for a small WHILE language with dependent
//! security labels.

pub mod analysis;
pub mod corpus;
mod error;
pub mod hs;
pub mod harness;
pub mod interp;
pub mod lang;
pub mod parser;
pub mod transform;
pub mod typecheck;

pub use error::{Error, Result};
