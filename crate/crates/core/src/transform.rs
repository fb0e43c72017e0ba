//! The bracket-driven transformation into programs over variable copies.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::lang::{Cmd, Expr, SiteId, Var};
use crate::{Error, Result};

/// Maps each source variable to its current copy.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(transparent)]
pub struct ActiveSet(BTreeMap<Var, Var>);

impl ActiveSet {
    pub fn identity<'a>(vars: impl IntoIterator<Item = &'a Var>) -> Self {
        ActiveSet(vars.into_iter().map(|x| (x.clone(), x.clone())).collect())
    }

    pub fn get(&self, x: &Var) -> Option<&Var> {
        self.0.get(x)
    }

    pub fn set(&mut self, x: Var, copy: Var) {
        self.0.insert(x, copy);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Var)> {
        self.0.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.0.keys()
    }

    pub fn range(&self) -> BTreeSet<Var> {
        self.0.values().cloned().collect()
    }

    pub fn contains(&self, x: &Var) -> bool {
        self.0.contains_key(x)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_injective(&self) -> bool {
        self.range().len() == self.0.len()
    }

    /// Every copy is a copy of the variable it is mapped from.
    pub fn respects_bases(&self) -> bool {
        self.0.iter().all(|(x, c)| base_of(c).is_ok_and(|b| &b == x))
    }
}

impl FromIterator<(Var, Var)> for ActiveSet {
    fn from_iter<I: IntoIterator<Item = (Var, Var)>>(iter: I) -> Self {
        ActiveSet(iter.into_iter().collect())
    }
}

/// Next unused copy index per base variable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FreshCounter(BTreeMap<Var, u32>);

impl FreshCounter {
    pub fn new() -> Self {
        FreshCounter::default()
    }

    pub fn fresh(&mut self, base: &Var) -> Var {
        let k = self.0.entry(base.clone()).or_insert(1);
        let v = Var::copy(base, *k);
        *k += 1;
        v
    }

    /// Index the next copy of `base` would get.
    pub fn peek(&self, base: &Var) -> u32 {
        self.0.get(base).copied().unwrap_or(1)
    }
}

/// Source variable of a copy: `x@3` and `x` both map to `x`.
pub fn base_of(v: &Var) -> Result<Var> {
    match v.split_copy() {
        Some((base, Some(_))) => Ok(Var::new(base)),
        Some((_, None)) => Ok(v.clone()),
        None => Err(Error::MalformedName(v.to_string())),
    }
}

pub fn transform_expr(a: &ActiveSet, e: &Expr) -> Result<Expr> {
    let mut missing = None;
    let out = e.map_vars(&mut |x| match a.get(x) {
        Some(c) => Some(Expr::Var(c.clone())),
        None => {
            missing.get_or_insert_with(|| x.clone());
            None
        }
    });
    match missing {
        Some(x) => Err(Error::Unbound(x)),
        None => Ok(out),
    }
}

/// Pointwise merge: agreeing copies are kept, disagreeing ones replaced by a
/// fresh copy. Fresh copies are minted in variable-name order.
pub fn phi_merge(a1: &ActiveSet, a2: &ActiveSet, fc: &mut FreshCounter) -> ActiveSet {
    a1.iter()
        .map(|(x, c1)| match a2.get(x) {
            Some(c2) if c2 == c1 => (x.clone(), c1.clone()),
            _ => (x.clone(), fc.fresh(x)),
        })
        .collect()
}

/// `target(v) := source(v)` for every `v` on which they differ, in name
/// order. Each assignment gets the next site id from `next_site`.
pub fn set_assign(target: &ActiveSet, source: &ActiveSet, next_site: &mut u32) -> Cmd {
    let mut cmds = Vec::new();
    for (x, t) in target.iter() {
        if let Some(s) = source.get(x) {
            if s != t {
                cmds.push(Cmd::Assign { site: SiteId(*next_site), target: t.clone(), rhs: Expr::Var(s.clone()) });
                *next_site += 1;
            }
        }
    }
    Cmd::seq_all(cmds)
}

/// State threaded through one transformation.
#[derive(Debug, Clone)]
pub struct Transformer {
    pub fresh: FreshCounter,
    pub next_site: u32,
    /// When set, every active set produced is recorded here.
    pub snapshots: Option<Vec<ActiveSet>>,
}

impl Transformer {
    /// Set-assignment sites are numbered after the largest site of `c`.
    pub fn for_program(c: &Cmd) -> Self {
        Transformer {
            fresh: FreshCounter::new(),
            next_site: c.max_site().map_or(0, |s| s.0 + 1),
            snapshots: None,
        }
    }

    pub fn recording(mut self) -> Self {
        self.snapshots = Some(Vec::new());
        self
    }

    fn record(&mut self, a: &ActiveSet) {
        if let Some(s) = &mut self.snapshots {
            s.push(a.clone());
        }
    }

    pub fn set_assign(&mut self, target: &ActiveSet, source: &ActiveSet) -> Cmd {
        set_assign(target, source, &mut self.next_site)
    }

    pub fn phi(&mut self, a1: &ActiveSet, a2: &ActiveSet) -> ActiveSet {
        let a = phi_merge(a1, a2, &mut self.fresh);
        self.record(&a);
        a
    }

    /// Transforms `c` under active set `a`, returning the final active set and
    /// the bracket-free program.
    pub fn transform_cmd(&mut self, a: &ActiveSet, c: &Cmd) -> Result<(ActiveSet, Cmd)> {
        let out = match c {
            Cmd::Skip => (a.clone(), Cmd::Skip),
            Cmd::Seq(c1, c2) => {
                let (a1, t1) = self.transform_cmd(a, c1)?;
                let (a2, t2) = self.transform_cmd(&a1, c2)?;
                (a2, Cmd::seq(t1, t2))
            }
            Cmd::Assign { site, target, rhs } => {
                let rhs = transform_expr(a, rhs)?;
                let mut a2 = a.clone();
                a2.set(target.clone(), target.clone());
                (a2, Cmd::Assign { site: *site, target: target.clone(), rhs })
            }
            Cmd::BracketAssign { site, target, rhs } => {
                let rhs = transform_expr(a, rhs)?;
                let copy = self.fresh.fresh(target);
                let mut a2 = a.clone();
                a2.set(target.clone(), copy.clone());
                (a2, Cmd::Assign { site: *site, target: copy, rhs })
            }
            Cmd::If { guard, then_branch, else_branch } => {
                let guard = transform_expr(a, guard)?;
                let (a1, t1) = self.transform_cmd(a, then_branch)?;
                let (a2, t2) = self.transform_cmd(a, else_branch)?;
                let a3 = self.phi(&a1, &a2);
                let s1 = self.set_assign(&a3, &a1);
                let s2 = self.set_assign(&a3, &a2);
                (a3, Cmd::if_(guard, Cmd::then(t1, s1), Cmd::then(t2, s2)))
            }
            Cmd::While { guard, body } => {
                let (a1, _) = self.transform_cmd(a, body)?;
                let a2 = self.phi(a, &a1);
                let guard = transform_expr(&a2, guard)?;
                let (a3, tb) = self.transform_cmd(&a2, body)?;
                let pre = self.set_assign(&a2, a);
                let post = self.set_assign(&a2, &a3);
                (a2, Cmd::then(pre, Cmd::while_(guard, Cmd::then(tb, post))))
            }
        };
        self.record(&out.0);
        Ok(out)
    }
}

/// Result of transforming a whole program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transformed {
    pub cmd: Cmd,
    pub initial: ActiveSet,
    pub active: ActiveSet,
}

impl Transformed {
    /// Copies (`x@k`) occurring in the transformed program.
    pub fn fresh_vars(&self) -> BTreeSet<Var> {
        self.cmd.vars().into_iter().filter(Var::is_copy).collect()
    }

    /// Every variable of the transformed program plus the initial active copies.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut v = self.cmd.vars();
        v.extend(self.initial.range());
        v.extend(self.active.range());
        v
    }
}

/// Transforms `c` from the identity active set over `vars(c)`.
pub fn transform_program(c: &Cmd) -> Result<Transformed> {
    transform_with(c, &c.vars())
}

/// Transforms `c` from the identity active set over `domain`, which must
/// cover the variables of `c`.
pub fn transform_with(c: &Cmd, domain: &BTreeSet<Var>) -> Result<Transformed> {
    for x in domain {
        if x.is_copy() {
            return Err(Error::MalformedName(format!("{x} (source variables cannot be copies)")));
        }
    }
    let initial = ActiveSet::identity(domain);
    let (active, cmd) = Transformer::for_program(c).transform_cmd(&initial, c)?;
    Ok(Transformed { cmd, initial, active })
}

/// Brackets every assignment.
pub fn bracket_all(c: &Cmd) -> Cmd {
    c.map_assigns(&mut |site, target, rhs, _| Cmd::BracketAssign { site, target: target.clone(), rhs: rhs.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::BinOp;
    use crate::parser::{parse_program, render_program};

    fn set(pairs: &[(&str, &str)]) -> ActiveSet {
        pairs.iter().map(|(k, v)| (Var::new(k), Var::new(v))).collect()
    }

    fn prog(s: &str) -> Cmd {
        parse_program(s).unwrap().cmd
    }

    #[test]
    fn base_names() {
        assert_eq!(base_of(&"x@3".into()).unwrap(), Var::new("x"));
        assert_eq!(base_of(&"x".into()).unwrap(), Var::new("x"));
        assert_eq!(base_of(&"l1@2".into()).unwrap(), Var::new("l1"));
        assert!(base_of(&"x@y".into()).is_err());
    }

    #[test]
    fn expressions_read_active_copies() {
        let e = Expr::bin(BinOp::Add, Expr::var("x"), Expr::Int(1));
        assert_eq!(transform_expr(&set(&[("x", "x@1")]), &e).unwrap().to_string(), "x@1 + 1");
        assert_eq!(transform_expr(&set(&[("x", "x")]), &e).unwrap(), e);
        let e = Expr::bin(BinOp::Mul, Expr::var("y"), Expr::var("z"));
        assert_eq!(transform_expr(&set(&[("y", "y@2"), ("z", "z")]), &e).unwrap().to_string(), "y@2 * z");
        assert_eq!(transform_expr(&set(&[]), &e), Err(Error::Unbound("y".into())));
    }

    #[test]
    fn phi_mints_copies_only_where_sets_differ() {
        let mut fc = FreshCounter::new();
        let a = set(&[("x", "x@1"), ("y", "y")]);
        assert_eq!(phi_merge(&a, &a, &mut fc), a);
        let mut fc = FreshCounter::new();
        fc.fresh(&"x".into());
        assert_eq!(phi_merge(&set(&[("x", "x")]), &set(&[("x", "x@1")]), &mut fc), set(&[("x", "x@2")]));
        let mut fc = FreshCounter::new();
        fc.fresh(&"x".into());
        fc.fresh(&"y".into());
        let m = phi_merge(&set(&[("x", "x@1"), ("y", "y")]), &set(&[("x", "x@1"), ("y", "y@1")]), &mut fc);
        assert_eq!(m, set(&[("x", "x@1"), ("y", "y@2")]));
    }

    #[test]
    fn set_assignment_emission() {
        let mut s = 10;
        assert_eq!(set_assign(&set(&[("x", "x")]), &set(&[("x", "x")]), &mut s), Cmd::Skip);
        assert_eq!(set_assign(&set(&[("x", "x@2")]), &set(&[("x", "x@1")]), &mut s).to_string(), "x@2 := x@1;\n");
        let c = set_assign(&set(&[("b", "b@2"), ("a", "a@3")]), &set(&[("a", "a"), ("b", "b@1")]), &mut s);
        assert_eq!(c.to_string(), "a@3 := a;\nb@2 := b@1;\n");
        assert_eq!(s, 13);
    }

    #[test]
    fn fig1a_golden() {
        let t = transform_program(&prog("x := h; [x := 0]; l := x;")).unwrap();
        assert_eq!(t.cmd.to_string(), "x := h;\nx@1 := 0;\nl := x@1;\n");
        assert_eq!(t.active, set(&[("h", "h"), ("l", "l"), ("x", "x@1")]));
        let text = render_program(&t.cmd, Some(&t.active));
        assert!(text.starts_with("#active h = h\n#active l = l\n#active x = x@1\n"));
    }

    #[test]
    fn bracket_free_programs_are_fixed_points() {
        let c = prog("x := h; if (x > 0) { y := 1; } else { y := x; } while (y < 4) { y := y + 1; }");
        let t = transform_program(&c).unwrap();
        assert_eq!(t.cmd, c);
        assert_eq!(t.active, t.initial);
    }

    #[test]
    fn fig5_bracket_redirects_later_guard() {
        let c = prog(
            "x := 0; y := 0; l1 := 0; if (h > 0) { l1 := -1; } if (l1 < 0) { y := h; } [l1 := 1]; if (l1 > 0) { x := y; } l2 := x;",
        );
        let t = transform_program(&c).unwrap();
        let text = t.cmd.to_string();
        assert!(text.contains("l1@1 := 1;\nif (l1@1 > 0) {\n  x := y;\n}\nl2 := x;\n"), "{text}");
    }

    #[test]
    fn loops_get_phi_copies() {
        let c = prog("x := 0; while (x < 3) { [x := x + 1]; }");
        let t = transform_program(&c).unwrap();
        assert_eq!(
            t.cmd.to_string(),
            "x := 0;\nx@2 := x;\nwhile (x@2 < 3) {\n  x@3 := x@2 + 1;\n  x@2 := x@3;\n}\n"
        );
        assert_eq!(t.active.get(&"x".into()), Some(&Var::new("x@2")));
    }

    #[test]
    fn bracket_all_is_idempotent() {
        let c = prog("x := 1; if (x) { [y := 2]; }");
        let b = bracket_all(&c);
        assert!(b.is_fully_bracketed());
        assert_eq!(bracket_all(&b), b);
        assert_eq!(bracket_all(&Cmd::Skip), Cmd::Skip);
        assert_eq!(bracket_all(&prog("x := 1;")).to_string(), "[x := 1];\n");
    }
}
