use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{Expr, Lattice, LevelId, Memory, RuntimeError, Var};

/// A security label: a level, a conditional on a guard expression, or a
/// join/meet of labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Label {
    Level(LevelId),
    Cond(Expr, Box<Label>, Box<Label>),
    Join(Box<Label>, Box<Label>),
    Meet(Box<Label>, Box<Label>),
}

impl Label {
    pub fn cond(guard: Expr, then: Label, otherwise: Label) -> Label {
        Label::Cond(guard, Box::new(then), Box::new(otherwise))
    }

    pub fn join(a: Label, b: Label) -> Label {
        Label::Join(Box::new(a), Box::new(b))
    }

    pub fn meet(a: Label, b: Label) -> Label {
        Label::Meet(Box::new(a), Box::new(b))
    }

    /// Concrete level under `m`. A `Cond` takes its first branch iff the
    /// guard evaluates to a nonzero value.
    pub fn eval(&self, m: &Memory, lat: &Lattice) -> Result<LevelId, RuntimeError> {
        match self {
            Label::Level(l) => Ok(*l),
            Label::Cond(g, t, e) => {
                if g.eval(m)? != 0 {
                    t.eval(m, lat)
                } else {
                    e.eval(m, lat)
                }
            }
            Label::Join(a, b) => Ok(lat.join(a.eval(m, lat)?, b.eval(m, lat)?)),
            Label::Meet(a, b) => Ok(lat.meet(a.eval(m, lat)?, b.eval(m, lat)?)),
        }
    }

    /// Evaluates with guard outcomes supplied by `guard_value` instead of a memory.
    pub fn eval_with(&self, lat: &Lattice, guard_value: &mut impl FnMut(&Expr) -> bool) -> LevelId {
        match self {
            Label::Level(l) => *l,
            Label::Cond(g, t, e) => {
                if guard_value(g) {
                    t.eval_with(lat, guard_value)
                } else {
                    e.eval_with(lat, guard_value)
                }
            }
            Label::Join(a, b) => lat.join(a.eval_with(lat, guard_value), b.eval_with(lat, guard_value)),
            Label::Meet(a, b) => lat.meet(a.eval_with(lat, guard_value), b.eval_with(lat, guard_value)),
        }
    }

    /// Variables occurring in guard expressions.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<Var>) {
        match self {
            Label::Level(_) => {}
            Label::Cond(g, t, e) => {
                g.collect_vars(out);
                t.collect_free(out);
                e.collect_free(out);
            }
            Label::Join(a, b) | Label::Meet(a, b) => {
                a.collect_free(out);
                b.collect_free(out);
            }
        }
    }

    pub fn mentions(&self, x: &Var) -> bool {
        match self {
            Label::Level(_) => false,
            Label::Cond(g, t, e) => g.mentions(x) || t.mentions(x) || e.mentions(x),
            Label::Join(a, b) | Label::Meet(a, b) => a.mentions(x) || b.mentions(x),
        }
    }

    /// Distinct guard expressions, in first-occurrence order.
    pub fn guards(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        self.collect_guards(&mut out);
        out
    }

    pub(crate) fn collect_guards(&self, out: &mut Vec<Expr>) {
        match self {
            Label::Level(_) => {}
            Label::Cond(g, t, e) => {
                if !out.contains(g) {
                    out.push(g.clone());
                }
                t.collect_guards(out);
                e.collect_guards(out);
            }
            Label::Join(a, b) | Label::Meet(a, b) => {
                a.collect_guards(out);
                b.collect_guards(out);
            }
        }
    }

    pub fn is_level(&self) -> bool {
        matches!(self, Label::Level(_))
    }

    /// True when no `Cond` occurs anywhere.
    pub fn is_static(&self) -> bool {
        match self {
            Label::Level(_) => true,
            Label::Cond(..) => false,
            Label::Join(a, b) | Label::Meet(a, b) => a.is_static() && b.is_static(),
        }
    }

    /// Folds joins and meets of bare levels and drops bottom/top units.
    pub fn simplify(&self, lat: &Lattice) -> Label {
        match self {
            Label::Level(_) => self.clone(),
            Label::Cond(g, t, e) => {
                let (t, e) = (t.simplify(lat), e.simplify(lat));
                if t == e {
                    t
                } else {
                    Label::cond(g.clone(), t, e)
                }
            }
            Label::Join(a, b) => match (a.simplify(lat), b.simplify(lat)) {
                (Label::Level(x), Label::Level(y)) => Label::Level(lat.join(x, y)),
                (Label::Level(x), other) | (other, Label::Level(x)) if x == lat.bottom() => other,
                (a, b) if a == b => a,
                (a, b) => Label::join(a, b),
            },
            Label::Meet(a, b) => match (a.simplify(lat), b.simplify(lat)) {
                (Label::Level(x), Label::Level(y)) => Label::Level(lat.meet(x, y)),
                (Label::Level(x), other) | (other, Label::Level(x)) if x == lat.top() => other,
                (a, b) if a == b => a,
                (a, b) => Label::meet(a, b),
            },
        }
    }

    pub fn display<'a>(&'a self, lat: &'a Lattice) -> LabelDisplay<'a> {
        LabelDisplay { label: self, lat }
    }
}

/// Renders a label with its lattice's level names.
pub struct LabelDisplay<'a> {
    label: &'a Label,
    lat: &'a Lattice,
}

impl fmt::Display for LabelDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        crate::parser::render::write_label(f, self.label, self.lat, 0)
    }
}
