//! Control-flow graphs, liveness and the predicate generator.

mod cfg;
mod liveness;
mod predicates;

pub use cfg::{Cfg, Node, NodeId, NodeKind};
pub use liveness::{liveness, LivenessMap, SiteLiveness};
pub use predicates::{predicates, Fact, FactSet};
