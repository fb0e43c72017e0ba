use serde::Serialize;

use super::{Lattice, LevelId, Memory, RuntimeError, TypingEnv, Var};
use crate::transform::ActiveSet;
use crate::{Error, Result};

/// View of a transformed memory through an active set: `x ↦ mt(a(x))`.
pub fn project_memory(mt: &Memory, a: &ActiveSet) -> Result<Memory> {
    a.iter()
        .map(|(x, copy)| {
            mt.get(copy)
                .map(|n| (x.clone(), n))
                .ok_or_else(|| Error::Internal(format!("memory has no copy `{copy}` of `{x}`")))
        })
        .collect()
}

/// View of a transformed typing environment through an active set.
pub fn project_env(gt: &TypingEnv, a: &ActiveSet) -> Result<TypingEnv> {
    a.iter()
        .map(|(x, copy)| {
            gt.get(copy)
                .map(|t| (x.clone(), t.clone()))
                .ok_or_else(|| Error::Internal(format!("environment has no label for copy `{copy}` of `{x}`")))
        })
        .collect()
}

/// Why two memories are not equivalent up to an observer level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LowDiff {
    pub var: Var,
    pub level1: LevelId,
    pub level2: LevelId,
    pub value1: i64,
    pub value2: i64,
}

/// First variable (in name order) on which `m1` and `m2` are distinguishable
/// by an observer at `obs`: either their concrete levels disagree about
/// visibility, or the variable is visible and the values differ.
pub fn low_diff(
    m1: &Memory,
    m2: &Memory,
    g: &TypingEnv,
    obs: LevelId,
    lat: &Lattice,
) -> Result<Option<LowDiff>, RuntimeError> {
    for (x, t) in g.entries() {
        let l1 = t.eval(m1, lat)?;
        let l2 = t.eval(m2, lat)?;
        let (vis1, vis2) = (lat.leq(l1, obs), lat.leq(l2, obs));
        let v1 = m1.get(x).ok_or_else(|| RuntimeError::Undefined(x.clone()))?;
        let v2 = m2.get(x).ok_or_else(|| RuntimeError::Undefined(x.clone()))?;
        if vis1 != vis2 || (vis1 && v1 != v2) {
            return Ok(Some(LowDiff { var: x.clone(), level1: l1, level2: l2, value1: v1, value2: v2 }));
        }
    }
    Ok(None)
}

/// `(Γ, obs)`-equivalence of two memories.
pub fn low_equiv(m1: &Memory, m2: &Memory, g: &TypingEnv, obs: LevelId, lat: &Lattice) -> Result<bool, RuntimeError> {
    Ok(low_diff(m1, m2, g, obs, lat)?.is_none())
}
