use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{Label, Lattice, Var};
use crate::typecheck::discharge::{discharge, DischargeConfig, Status};
use crate::analysis::FactSet;

/// Map from variables to labels, with an optional fallback for unlisted
/// variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypingEnv {
    entries: BTreeMap<Var, Label>,
    default: Option<Label>,
}

impl TypingEnv {
    pub fn new() -> Self {
        TypingEnv::default()
    }

    pub fn with_default(default: Label) -> Self {
        TypingEnv { entries: BTreeMap::new(), default: Some(default) }
    }

    pub fn insert(&mut self, x: Var, t: Label) {
        self.entries.insert(x, t);
    }

    pub fn set_default(&mut self, t: Option<Label>) {
        self.default = t;
    }

    pub fn default_label(&self) -> Option<&Label> {
        self.default.as_ref()
    }

    /// Label of `x`: its own entry, else the default.
    pub fn get(&self, x: &Var) -> Option<&Label> {
        self.entries.get(x).or(self.default.as_ref())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Var, &Label)> {
        self.entries.iter()
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.entries.keys()
    }

    pub fn contains(&self, x: &Var) -> bool {
        self.entries.contains_key(x)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Free variables of the label of `x` (empty when unlabeled).
    pub fn label_vars(&self, x: &Var) -> BTreeSet<Var> {
        self.get(x).map(Label::free_vars).unwrap_or_default()
    }

    /// True when every label (including the default) is a bare level.
    pub fn is_levels_only(&self) -> bool {
        self.entries.values().chain(&self.default).all(Label::is_level)
    }

    /// Keeps only the entries accepted by `keep`; the default is dropped.
    pub fn restrict(&self, mut keep: impl FnMut(&Var) -> bool) -> TypingEnv {
        TypingEnv {
            entries: self.entries.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), v.clone())).collect(),
            default: None,
        }
    }
}

impl FromIterator<(Var, Label)> for TypingEnv {
    fn from_iter<I: IntoIterator<Item = (Var, Label)>>(iter: I) -> Self {
        TypingEnv { entries: iter.into_iter().collect(), default: None }
    }
}

/// One way in which an environment fails to be well formed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WfViolation {
    /// `var`'s label mentions `var` itself.
    SelfDependence { var: Var },
    /// `var` depends on `dep`, whose own label is dependent.
    Chain { var: Var, dep: Var },
    /// `var` depends on `dep`, whose label is not always below `var`'s.
    NotBelow { var: Var, dep: Var },
    /// `var` depends on `dep`, which has no label.
    Unlabeled { var: Var, dep: Var },
}

impl fmt::Display for WfViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WfViolation::SelfDependence { var } => write!(f, "label of `{var}` depends on `{var}` itself"),
            WfViolation::Chain { var, dep } => {
                write!(f, "label of `{var}` depends on `{dep}`, whose label is itself dependent")
            }
            WfViolation::NotBelow { var, dep } => {
                write!(f, "label of `{dep}` is not always below the label of `{var}`, which depends on it")
            }
            WfViolation::Unlabeled { var, dep } => {
                write!(f, "label of `{var}` depends on unlabeled variable `{dep}`")
            }
        }
    }
}

/// Checks that no label depends on a more restrictive variable and that
/// dependencies never chain. The ordering clause is discharged by guard
/// case-splitting under an empty hypothesis.
pub fn env_wellformed(g: &TypingEnv, lat: &Lattice) -> Result<(), Vec<WfViolation>> {
    let mut out = Vec::new();
    let cfg = DischargeConfig::default();
    for (x, tx) in g.entries() {
        for dep in tx.free_vars() {
            if &dep == x {
                out.push(WfViolation::SelfDependence { var: x.clone() });
                continue;
            }
            let Some(tdep) = g.get(&dep) else {
                out.push(WfViolation::Unlabeled { var: x.clone(), dep });
                continue;
            };
            if !tdep.free_vars().is_empty() {
                out.push(WfViolation::Chain { var: x.clone(), dep: dep.clone() });
            }
            let verdict = discharge(&FactSet::new(), tdep, tx, lat, &cfg);
            if verdict.status != Status::Valid {
                out.push(WfViolation::NotBelow { var: x.clone(), dep });
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
