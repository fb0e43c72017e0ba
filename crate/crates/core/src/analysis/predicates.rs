use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::lang::{BinOp, Cmd, Expr, Memory, RuntimeError, SiteId, Var};

/// A fact known to hold at a program point.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Fact {
    /// `e` evaluates to a nonzero value.
    NonZero(Expr),
    /// `e` evaluates to 0.
    Zero(Expr),
    /// `x` currently holds the value of `e`.
    Equals(Var, Expr),
}

impl Fact {
    pub fn holds(&self, m: &Memory) -> Result<bool, RuntimeError> {
        Ok(match self {
            Fact::NonZero(e) => e.eval(m)? != 0,
            Fact::Zero(e) => e.eval(m)? == 0,
            Fact::Equals(x, e) => m.get(x).ok_or_else(|| RuntimeError::Undefined(x.clone()))? == e.eval(m)?,
        })
    }

    pub fn mentions(&self, x: &Var) -> bool {
        match self {
            Fact::NonZero(e) | Fact::Zero(e) => e.mentions(x),
            Fact::Equals(y, e) => y == x || e.mentions(x),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        match self {
            Fact::NonZero(e) | Fact::Zero(e) => e.vars(),
            Fact::Equals(y, e) => {
                let mut v = e.vars();
                v.insert(y.clone());
                v
            }
        }
    }
}

fn is_boolean(e: &Expr) -> bool {
    matches!(e, Expr::Bin(op, ..) if op.is_comparison() || matches!(op, BinOp::And | BinOp::Or))
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fact::NonZero(e) if is_boolean(e) => write!(f, "{e}"),
            Fact::NonZero(e) => write!(f, "{e} != 0"),
            Fact::Zero(e) if is_boolean(e) => write!(f, "!({e})"),
            Fact::Zero(e) => write!(f, "{e} == 0"),
            Fact::Equals(x, e) => write!(f, "{x} = {e}"),
        }
    }
}

impl Serialize for Fact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Hash, Serialize)]
#[serde(transparent)]
pub struct FactSet(BTreeSet<Fact>);

impl FactSet {
    pub fn new() -> Self {
        FactSet::default()
    }

    pub fn insert(&mut self, f: Fact) {
        self.0.insert(f);
    }

    pub fn with(mut self, f: Fact) -> Self {
        self.insert(f);
        self
    }

    pub fn contains(&self, f: &Fact) -> bool {
        self.0.contains(f)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fact> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Drops every fact mentioning `x`.
    pub fn kill(&mut self, x: &Var) {
        self.0.retain(|f| !f.mentions(x));
    }

    pub fn intersect(&self, other: &FactSet) -> FactSet {
        FactSet(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.0.iter().flat_map(Fact::vars).collect()
    }

    pub fn holds(&self, m: &Memory) -> Result<bool, RuntimeError> {
        for f in &self.0 {
            if !f.holds(m)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl FromIterator<Fact> for FactSet {
    fn from_iter<I: IntoIterator<Item = Fact>>(iter: I) -> Self {
        FactSet(iter.into_iter().collect())
    }
}

impl fmt::Display for FactSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("true");
        }
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" && "))
    }
}

/// Facts holding just before each assignment site.
pub fn predicates(c: &Cmd) -> BTreeMap<SiteId, FactSet> {
    let mut out = BTreeMap::new();
    walk(c, FactSet::new(), &mut out);
    out
}

fn walk(c: &Cmd, facts: FactSet, out: &mut BTreeMap<SiteId, FactSet>) -> FactSet {
    match c {
        Cmd::Skip => facts,
        Cmd::Seq(a, b) => {
            let mid = walk(a, facts, out);
            walk(b, mid, out)
        }
        Cmd::Assign { site, target, rhs } | Cmd::BracketAssign { site, target, rhs } => {
            out.insert(*site, facts.clone());
            let mut facts = facts;
            facts.kill(target);
            if !rhs.mentions(target) {
                facts.insert(Fact::Equals(target.clone(), rhs.clone()));
            }
            facts
        }
        Cmd::If { guard, then_branch, else_branch } => {
            let t = walk(then_branch, facts.clone().with(Fact::NonZero(guard.clone())), out);
            let e = walk(else_branch, facts.with(Fact::Zero(guard.clone())), out);
            t.intersect(&e)
        }
        Cmd::While { guard, body } => {
            let mut facts = facts;
            for x in body.assigned_vars() {
                facts.kill(&x);
            }
            walk(body, facts.clone().with(Fact::NonZero(guard.clone())), out);
            facts.with(Fact::Zero(guard.clone()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expr, parse_transformed_program};

    fn e(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn branch_condition_reaches_assignment() {
        let c = parse_transformed_program(
            "while (x < 10) { if (x % 2 == 0) { y := h; } else { l := y; } x := x + 1; y := 0; }",
        )
        .unwrap()
        .cmd;
        let p = predicates(&c);
        assert!(p[&SiteId(0)].contains(&Fact::NonZero(e("x % 2 == 0"))));
        assert!(p[&SiteId(1)].contains(&Fact::Zero(e("x % 2 == 0"))));
        assert!(p[&SiteId(0)].contains(&Fact::NonZero(e("x < 10"))));
    }

    #[test]
    fn equality_after_copy_assignment() {
        let c = parse_transformed_program(
            "x := -1; if (x > 0) { y := h; } else { y := 1; } x@1 := 0 - x; if (x@1 > 0) { l := y; }",
        )
        .unwrap()
        .cmd;
        let p = predicates(&c);
        let at = &p[&SiteId(4)];
        assert!(at.contains(&Fact::Equals("x@1".into(), e("0 - x"))), "{at}");
        assert!(at.contains(&Fact::NonZero(e("x@1 > 0"))), "{at}");
        assert!(at.contains(&Fact::Equals("x".into(), e("-1"))), "{at}");
    }

    #[test]
    fn self_referential_assignment_adds_nothing() {
        let c = parse_transformed_program("x := x + 1; y := 2;").unwrap().cmd;
        let p = predicates(&c);
        assert!(p[&SiteId(0)].is_empty());
        assert!(p[&SiteId(1)].is_empty());
    }

    #[test]
    fn merge_is_intersection() {
        let c = parse_transformed_program("if (a) { x := 1; z := 0; } else { x := 1; } w := 2;").unwrap().cmd;
        let p = predicates(&c);
        assert_eq!(p[&SiteId(3)], FactSet::from_iter([Fact::Equals("x".into(), e("1"))]));
    }

    #[test]
    fn loops_kill_body_assigned_facts() {
        let c = parse_transformed_program("i := 0; k := 5; while (i < 3) { i := i + 1; } z := i;").unwrap().cmd;
        let p = predicates(&c);
        let body = &p[&SiteId(2)];
        assert!(body.iter().all(|f| !f.mentions(&"i".into()) || *f == Fact::NonZero(e("i < 3"))));
        assert!(body.contains(&Fact::NonZero(e("i < 3"))));
        assert!(body.contains(&Fact::Equals("k".into(), e("5"))));
        let exit = &p[&SiteId(3)];
        assert!(exit.contains(&Fact::Zero(e("i < 3"))));
        assert!(!exit.contains(&Fact::Equals("i".into(), e("0"))));
    }
}
