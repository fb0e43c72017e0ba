use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::{Expr, Var};

/// Identifies one assignment in a program. Unique within a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SiteId(pub u32);

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Commands of the source and transformed languages. `BracketAssign` only
/// occurs in source programs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Cmd {
    Skip,
    Seq(Arc<Cmd>, Arc<Cmd>),
    Assign { site: SiteId, target: Var, rhs: Expr },
    BracketAssign { site: SiteId, target: Var, rhs: Expr },
    If { guard: Expr, then_branch: Arc<Cmd>, else_branch: Arc<Cmd> },
    While { guard: Expr, body: Arc<Cmd> },
}

/// A view of either kind of assignment.
#[derive(Debug, Clone, Copy)]
pub struct AssignRef<'a> {
    pub site: SiteId,
    pub target: &'a Var,
    pub rhs: &'a Expr,
    pub bracketed: bool,
}

impl Cmd {
    pub fn assign(site: u32, target: impl AsRef<str>, rhs: Expr) -> Cmd {
        Cmd::Assign { site: SiteId(site), target: Var::new(target), rhs }
    }

    pub fn bracket(site: u32, target: impl AsRef<str>, rhs: Expr) -> Cmd {
        Cmd::BracketAssign { site: SiteId(site), target: Var::new(target), rhs }
    }

    pub fn if_(guard: Expr, then_branch: Cmd, else_branch: Cmd) -> Cmd {
        Cmd::If { guard, then_branch: Arc::new(then_branch), else_branch: Arc::new(else_branch) }
    }

    pub fn while_(guard: Expr, body: Cmd) -> Cmd {
        Cmd::While { guard, body: Arc::new(body) }
    }

    /// Sequential composition, kept right-nested so that `seq(seq(a, b), c)`
    /// and `seq(a, seq(b, c))` build the same tree.
    pub fn seq(first: Cmd, second: Cmd) -> Cmd {
        match first {
            Cmd::Seq(a, b) => {
                let rest = Cmd::seq(Arc::unwrap_or_clone(b), second);
                Cmd::Seq(a, Arc::new(rest))
            }
            first => Cmd::Seq(Arc::new(first), Arc::new(second)),
        }
    }

    /// `first; second`, dropping either side when it is `skip`.
    pub fn then(first: Cmd, second: Cmd) -> Cmd {
        if second == Cmd::Skip {
            first
        } else if first == Cmd::Skip {
            second
        } else {
            Cmd::seq(first, second)
        }
    }

    /// Right-nested sequence of `cmds`; `skip` when empty.
    pub fn seq_all(cmds: impl IntoIterator<Item = Cmd>) -> Cmd {
        let mut cmds: Vec<Cmd> = cmds.into_iter().collect();
        let Some(mut acc) = cmds.pop() else {
            return Cmd::Skip;
        };
        while let Some(c) = cmds.pop() {
            acc = Cmd::seq(c, acc);
        }
        acc
    }

    pub fn as_assign(&self) -> Option<AssignRef<'_>> {
        match self {
            Cmd::Assign { site, target, rhs } => {
                Some(AssignRef { site: *site, target, rhs, bracketed: false })
            }
            Cmd::BracketAssign { site, target, rhs } => {
                Some(AssignRef { site: *site, target, rhs, bracketed: true })
            }
            _ => None,
        }
    }

    /// Visits every assignment in textual order.
    pub fn for_each_assign<'a>(&'a self, f: &mut impl FnMut(AssignRef<'a>)) {
        match self {
            Cmd::Skip => {}
            Cmd::Seq(a, b) => {
                a.for_each_assign(f);
                b.for_each_assign(f);
            }
            Cmd::Assign { .. } | Cmd::BracketAssign { .. } => f(self.as_assign().unwrap()),
            Cmd::If { then_branch, else_branch, .. } => {
                then_branch.for_each_assign(f);
                else_branch.for_each_assign(f);
            }
            Cmd::While { body, .. } => body.for_each_assign(f),
        }
    }

    pub fn assignments(&self) -> Vec<AssignRef<'_>> {
        let mut out = Vec::new();
        self.for_each_assign(&mut |a| out.push(a));
        out
    }

    /// Every variable read or written.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Cmd::Skip => {}
            Cmd::Seq(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Cmd::Assign { target, rhs, .. } | Cmd::BracketAssign { target, rhs, .. } => {
                out.insert(target.clone());
                rhs.collect_vars(out);
            }
            Cmd::If { guard, then_branch, else_branch } => {
                guard.collect_vars(out);
                then_branch.collect_vars(out);
                else_branch.collect_vars(out);
            }
            Cmd::While { guard, body } => {
                guard.collect_vars(out);
                body.collect_vars(out);
            }
        }
    }

    pub fn assigned_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.for_each_assign(&mut |a| {
            out.insert(a.target.clone());
        });
        out
    }

    pub fn sites(&self) -> Vec<SiteId> {
        self.assignments().iter().map(|a| a.site).collect()
    }

    pub fn max_site(&self) -> Option<SiteId> {
        self.sites().into_iter().max()
    }

    pub fn has_brackets(&self) -> bool {
        self.assignments().iter().any(|a| a.bracketed)
    }

    pub fn is_fully_bracketed(&self) -> bool {
        self.assignments().iter().all(|a| a.bracketed)
    }

    /// Same structure with sites renumbered 0, 1, ... in textual order.
    pub fn renumber_sites(&self) -> Cmd {
        let mut next = 0;
        self.renumber_from(&mut next)
    }

    fn renumber_from(&self, next: &mut u32) -> Cmd {
        let mut fresh = || {
            let s = SiteId(*next);
            *next += 1;
            s
        };
        match self {
            Cmd::Skip => Cmd::Skip,
            Cmd::Seq(a, b) => {
                let a = a.renumber_from(next);
                let b = b.renumber_from(next);
                Cmd::Seq(Arc::new(a), Arc::new(b))
            }
            Cmd::Assign { target, rhs, .. } => {
                Cmd::Assign { site: fresh(), target: target.clone(), rhs: rhs.clone() }
            }
            Cmd::BracketAssign { target, rhs, .. } => {
                Cmd::BracketAssign { site: fresh(), target: target.clone(), rhs: rhs.clone() }
            }
            Cmd::If { guard, then_branch, else_branch } => {
                let t = then_branch.renumber_from(next);
                let e = else_branch.renumber_from(next);
                Cmd::if_(guard.clone(), t, e)
            }
            Cmd::While { guard, body } => Cmd::while_(guard.clone(), body.renumber_from(next)),
        }
    }

    /// Replaces every bracketed assignment by a plain one.
    pub fn strip_brackets(&self) -> Cmd {
        self.map_assigns(&mut |site, target, rhs, _| Cmd::Assign {
            site,
            target: target.clone(),
            rhs: rhs.clone(),
        })
    }

    pub(crate) fn map_assigns(
        &self,
        f: &mut impl FnMut(SiteId, &Var, &Expr, bool) -> Cmd,
    ) -> Cmd {
        match self {
            Cmd::Skip => Cmd::Skip,
            Cmd::Seq(a, b) => {
                let a = a.map_assigns(f);
                let b = b.map_assigns(f);
                Cmd::Seq(Arc::new(a), Arc::new(b))
            }
            Cmd::Assign { site, target, rhs } => f(*site, target, rhs, false),
            Cmd::BracketAssign { site, target, rhs } => f(*site, target, rhs, true),
            Cmd::If { guard, then_branch, else_branch } => {
                let t = then_branch.map_assigns(f);
                let e = else_branch.map_assigns(f);
                Cmd::if_(guard.clone(), t, e)
            }
            Cmd::While { guard, body } => Cmd::while_(guard.clone(), body.map_assigns(f)),
        }
    }

    /// Number of AST nodes, used to bound random generation.
    pub fn size(&self) -> usize {
        match self {
            Cmd::Skip => 1,
            Cmd::Seq(a, b) => 1 + a.size() + b.size(),
            Cmd::Assign { rhs, .. } | Cmd::BracketAssign { rhs, .. } => 1 + rhs.size(),
            Cmd::If { guard, then_branch, else_branch } => {
                1 + guard.size() + then_branch.size() + else_branch.size()
            }
            Cmd::While { guard, body } => 1 + guard.size() + body.size(),
        }
    }
}

impl fmt::Display for Cmd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::render_program(self, None))
    }
}
