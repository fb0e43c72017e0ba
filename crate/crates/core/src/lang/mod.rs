//! Abstract syntax, values, security lattices, labels and environments.

mod cmd;
mod env;
mod expr;
mod label;
mod lattice;
mod memory;
mod projection;

pub use cmd::{AssignRef, Cmd, SiteId};
pub use env::{env_wellformed, TypingEnv, WfViolation};
pub use expr::{BinOp, Expr, RuntimeError, Var, COPY_SEPARATOR};
pub use label::{Label, LabelDisplay};
pub use lattice::{Lattice, LevelId};
pub use memory::Memory;
pub use projection::{low_diff, low_equiv, project_memory, project_env, LowDiff};
