//! The flow-sensitive baseline system with floating levels, and the
//! construction of a fixed-level environment for the transformed program of
//! a fully bracketed source.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::lang::{Cmd, Expr, Label, Lattice, LevelId, TypingEnv, Var};
use crate::transform::{base_of, transform_expr, ActiveSet, Transformer};
use crate::typecheck::{check_transformed, CheckOptions, CheckReport};
use crate::{Error, Result};

/// Source variables to levels.
pub type HsEnv = BTreeMap<Var, LevelId>;

fn expr_level(g: &HsEnv, e: &Expr, lat: &Lattice) -> Result<LevelId> {
    let mut l = lat.bottom();
    for x in e.vars() {
        l = lat.join(l, *g.get(&x).ok_or_else(|| Error::Unbound(x.clone()))?);
    }
    Ok(l)
}

fn env_join(a: &HsEnv, b: &HsEnv, lat: &Lattice) -> HsEnv {
    let mut out = a.clone();
    for (x, l) in b {
        out.entry(x.clone()).and_modify(|m| *m = lat.join(*m, *l)).or_insert(*l);
    }
    out
}

/// Final environment of `c` started in `g` under context `pc`. Brackets are
/// ignored.
pub fn hs_check(pc: LevelId, g: &HsEnv, c: &Cmd, lat: &Lattice) -> Result<HsEnv> {
    match c {
        Cmd::Skip => Ok(g.clone()),
        Cmd::Seq(a, b) => {
            let mid = hs_check(pc, g, a, lat)?;
            hs_check(pc, &mid, b, lat)
        }
        Cmd::Assign { target, rhs, .. } | Cmd::BracketAssign { target, rhs, .. } => {
            let mut out = g.clone();
            out.insert(target.clone(), lat.join(pc, expr_level(g, rhs, lat)?));
            Ok(out)
        }
        Cmd::If { guard, then_branch, else_branch } => {
            let pc2 = lat.join(pc, expr_level(g, guard, lat)?);
            let g1 = hs_check(pc2, g, then_branch, lat)?;
            let g2 = hs_check(pc2, g, else_branch, lat)?;
            Ok(env_join(&g1, &g2, lat))
        }
        Cmd::While { guard, body } => hs_while(pc, g, guard, body, lat),
    }
}

/// Kleene iteration `Γ'_{i+1} = Γ''_i ⊔ Γ` from `Γ'_0 = Γ`.
fn hs_while(pc: LevelId, g: &HsEnv, guard: &Expr, body: &Cmd, lat: &Lattice) -> Result<HsEnv> {
    let mut vars: BTreeSet<Var> = g.keys().cloned().collect();
    vars.extend(body.assigned_vars());
    let cap = vars.len() * lat.height().max(1) + 1;
    let mut cur = g.clone();
    for _ in 0..=cap {
        let pc2 = lat.join(pc, expr_level(&cur, guard, lat)?);
        let after = hs_check(pc2, &cur, body, lat)?;
        let next = env_join(&after, g, lat);
        if next == cur {
            return Ok(cur);
        }
        cur = next;
    }
    Err(Error::Internal(format!("loop typing did not stabilize within {cap} rounds")))
}

/// Which construction rule introduced a binding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Skip,
    Assign,
    If,
    While,
}

/// Transformed variables to levels, with the rule that produced each binding.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConstructedEnv {
    pub levels: BTreeMap<Var, LevelId>,
    pub provenance: BTreeMap<Var, Rule>,
}

impl ConstructedEnv {
    /// `Γ_α`: each active copy gets the level of its source variable.
    fn lift(g: &HsEnv, a: &ActiveSet, rule: Rule) -> Result<ConstructedEnv> {
        let mut out = ConstructedEnv::default();
        for (x, copy) in a.iter() {
            let l = *g.get(x).ok_or_else(|| Error::Unbound(x.clone()))?;
            out.levels.insert(copy.clone(), l);
            out.provenance.insert(copy.clone(), rule);
        }
        Ok(out)
    }

    pub fn to_env(&self) -> TypingEnv {
        self.levels.iter().map(|(x, l)| (x.clone(), Label::Level(*l))).collect()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.levels.keys()
    }
}

/// A binding dropped by a merge because an earlier environment had it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub var: Var,
    pub kept: LevelId,
    pub dropped: LevelId,
}

/// Union of `envs`, earlier ones winning on conflicts.
fn gmerge(envs: Vec<ConstructedEnv>, conflicts: &mut Vec<Conflict>) -> ConstructedEnv {
    let mut out = ConstructedEnv::default();
    for e in envs {
        for (x, l) in e.levels {
            match out.levels.get(&x) {
                Some(k) => conflicts.push(Conflict { var: x, kept: *k, dropped: l }),
                None => {
                    out.provenance.insert(x.clone(), e.provenance[&x]);
                    out.levels.insert(x, l);
                }
            }
        }
    }
    out
}

/// A variable whose copy was unchanged by a command while its level changed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExtensionViolation {
    pub var: Var,
    pub before: LevelId,
    pub after: LevelId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Construction {
    pub hs_final: HsEnv,
    pub initial: ActiveSet,
    pub active: ActiveSet,
    pub transformed: Cmd,
    pub gt: ConstructedEnv,
    /// Every merge conflict, including ones between equal levels.
    pub conflicts: Vec<Conflict>,
    pub extension_violations: Vec<ExtensionViolation>,
}

impl Construction {
    /// Conflicts that actually picked one level over a different one.
    pub fn real_conflicts(&self) -> impl Iterator<Item = &Conflict> {
        self.conflicts.iter().filter(|c| c.kept != c.dropped)
    }
}

struct Builder<'a> {
    lat: &'a Lattice,
    tr: Transformer,
    conflicts: Vec<Conflict>,
    extension: Vec<ExtensionViolation>,
}

impl Builder<'_> {
    /// One construction judgment; returns (Γ', α', c̄, Γ̄).
    fn build(&mut self, pc: LevelId, g: &HsEnv, a: &ActiveSet, c: &Cmd) -> Result<(HsEnv, ActiveSet, Cmd, ConstructedEnv)> {
        let lat = self.lat;
        let out = match c {
            Cmd::Skip => (g.clone(), a.clone(), Cmd::Skip, ConstructedEnv::lift(g, a, Rule::Skip)?),
            Cmd::Seq(c1, c2) => {
                let (g1, a1, t1, e1) = self.build(pc, g, a, c1)?;
                let (g2, a2, t2, e2) = self.build(pc, &g1, &a1, c2)?;
                (g2, a2, Cmd::seq(t1, t2), gmerge(vec![e1, e2], &mut self.conflicts))
            }
            Cmd::BracketAssign { site, target, rhs } => {
                let tau = lat.join(pc, expr_level(g, rhs, lat)?);
                let mut g2 = g.clone();
                g2.insert(target.clone(), tau);
                let rhs = transform_expr(a, rhs)?;
                let copy = self.tr.fresh.fresh(target);
                let mut a2 = a.clone();
                a2.set(target.clone(), copy.clone());
                let mut env = ConstructedEnv::lift(g, a, Rule::Skip)?;
                env.levels.insert(copy.clone(), tau);
                env.provenance.insert(copy.clone(), Rule::Assign);
                (g2, a2, Cmd::Assign { site: *site, target: copy, rhs }, env)
            }
            Cmd::Assign { .. } => {
                return Err(Error::Usage("construction needs a fully bracketed program".into()));
            }
            Cmd::If { guard, then_branch, else_branch } => {
                let pc2 = lat.join(pc, expr_level(g, guard, lat)?);
                let guard = transform_expr(a, guard)?;
                let (g1, a1, t1, e1) = self.build(pc2, g, a, then_branch)?;
                let (g2, a2, t2, e2) = self.build(pc2, g, a, else_branch)?;
                let a3 = self.tr.phi(&a1, &a2);
                let s1 = self.tr.set_assign(&a3, &a1);
                let s2 = self.tr.set_assign(&a3, &a2);
                let g3 = env_join(&g1, &g2, lat);
                let merged = ConstructedEnv::lift(&g3, &a3, Rule::If)?;
                let env = gmerge(vec![e1, e2, merged], &mut self.conflicts);
                (g3, a3, Cmd::if_(guard, Cmd::then(t1, s1), Cmd::then(t2, s2)), env)
            }
            Cmd::While { guard, body } => {
                let g_fix = hs_check(pc, g, c, lat)?;
                let tau = expr_level(&g_fix, guard, lat)?;
                let (a1, _) = self.tr.transform_cmd(a, body)?;
                let a2 = self.tr.phi(a, &a1);
                let guard = transform_expr(&a2, guard)?;
                // The body is constructed from the fixpoint; its own output
                // environment is not used, as in the rule.
                let (_, a3, tb, e0) = self.build(lat.join(tau, pc), &g_fix, &a2, body)?;
                let pre = self.tr.set_assign(&a2, a);
                let post = self.tr.set_assign(&a2, &a3);
                let before = ConstructedEnv::lift(g, a, Rule::While)?;
                let env = gmerge(vec![e0, before], &mut self.conflicts);
                (g_fix, a2, Cmd::then(pre, Cmd::while_(guard, Cmd::then(tb, post))), env)
            }
        };
        for (v, copy) in a.iter() {
            if out.1.get(v) == Some(copy) {
                if let (Some(b), Some(f)) = (g.get(v), out.0.get(v)) {
                    if b != f {
                        self.extension.push(ExtensionViolation { var: v.clone(), before: *b, after: *f });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Runs the baseline system and the transformation in lock-step over the
/// fully bracketed `c`, building a level for every transformed variable.
pub fn construct_env(pc: LevelId, g: &HsEnv, a: &ActiveSet, c: &Cmd, lat: &Lattice) -> Result<Construction> {
    if !c.is_fully_bracketed() {
        return Err(Error::Usage("construction needs a fully bracketed program".into()));
    }
    let mut b = Builder { lat, tr: Transformer::for_program(c), conflicts: Vec::new(), extension: Vec::new() };
    let (hs_final, active, transformed, gt) = b.build(pc, g, a, c)?;
    Ok(Construction {
        hs_final,
        initial: a.clone(),
        active,
        transformed,
        gt,
        conflicts: b.conflicts,
        extension_violations: b.extension,
    })
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub ok: bool,
    pub report: CheckReport,
    /// Bindings outside the initial active copies and the program's fresh copies.
    pub outside_domain: Vec<Var>,
}

/// Type checks `ct` under the constructed levels and checks that the
/// environment only binds initial copies and fresh copies of `ct`.
pub fn verify_construction(
    gt: &ConstructedEnv,
    ct: &Cmd,
    pc: LevelId,
    initial: &ActiveSet,
    active: &ActiveSet,
    lat: &Lattice,
) -> Result<Verification> {
    let opts = CheckOptions { levels_only: true, pc: Some(Label::Level(pc)), ..Default::default() };
    let report = check_transformed(ct, initial, active, &gt.to_env(), lat, &opts)?;
    let allowed: BTreeSet<Var> = initial.range().into_iter().chain(ct.vars().into_iter().filter(Var::is_copy)).collect();
    let outside_domain: Vec<Var> = gt.domain().filter(|v| !allowed.contains(*v)).cloned().collect();
    Ok(Verification { ok: report.accepted && outside_domain.is_empty(), report, outside_domain })
}

/// Levels of a levels-only typing environment restricted to source names.
pub fn hs_env_from(env: &TypingEnv, vars: &BTreeSet<Var>) -> Result<HsEnv> {
    let mut out = HsEnv::new();
    for v in vars {
        match env.get(v) {
            Some(Label::Level(l)) => {
                out.insert(v.clone(), *l);
            }
            Some(_) => return Err(Error::Config(format!("`{v}` needs a bare level for the flow-sensitive system"))),
            None => return Err(Error::MissingLabel(v.clone())),
        }
        if base_of(v)? != *v {
            return Err(Error::MalformedName(v.to_string()));
        }
    }
    Ok(out)
}
