use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::Var;

/// Total map from variables to integer values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Memory(BTreeMap<Var, i64>);

impl Memory {
    pub fn new() -> Self {
        Memory(BTreeMap::new())
    }

    /// Memory mapping every variable in `vars` to zero.
    pub fn zeroed<'a>(vars: impl IntoIterator<Item = &'a Var>) -> Self {
        vars.into_iter().map(|v| (v.clone(), 0)).collect()
    }

    pub fn get(&self, x: &Var) -> Option<i64> {
        self.0.get(x).copied()
    }

    pub fn set(&mut self, x: Var, n: i64) {
        self.0.insert(x, n);
    }

    pub fn contains(&self, x: &Var) -> bool {
        self.0.contains_key(x)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, i64)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.0.keys()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Restriction to the variables accepted by `keep`.
    pub fn restrict(&self, mut keep: impl FnMut(&Var) -> bool) -> Memory {
        self.0.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), *v)).collect()
    }

    /// Overlays `other` on top of `self`.
    pub fn overlay(&mut self, other: &Memory) {
        for (k, v) in other.iter() {
            self.set(k.clone(), v);
        }
    }
}

impl FromIterator<(Var, i64)> for Memory {
    fn from_iter<I: IntoIterator<Item = (Var, i64)>>(iter: I) -> Self {
        Memory(iter.into_iter().collect())
    }
}

impl fmt::Display for Memory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k} = {v}")?;
        }
        f.write_str("}")
    }
}
