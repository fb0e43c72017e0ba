//! Discharging obligations `⊨ P ⇒ τ1 ⊑ τ2` by case-splitting on guards.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::fm::{feasible, linearize, Constraint, Feasibility};
use crate::analysis::{Fact, FactSet};
use crate::lang::{BinOp, Expr, Label, Lattice, Memory, Var};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DischargeConfig {
    /// Above this many distinct guards the obligation is left unknown.
    pub max_guards: usize,
    /// Working-set cap for elimination.
    pub max_constraints: usize,
    /// Candidate memories tried per case when looking for a witness.
    pub witness_budget: usize,
    pub seed: u64,
}

impl Default for DischargeConfig {
    fn default() -> Self {
        DischargeConfig { max_guards: 12, max_constraints: 400, witness_budget: 4000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Valid,
    Violated,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub status: Status,
    /// A memory satisfying the hypothesis under which the ordering fails.
    pub witness: Option<Memory>,
    pub note: Option<String>,
    /// Guard valuations examined, and how many of them were refuted.
    pub cases: usize,
    pub refuted: usize,
}

/// A hypothesis literal: `expr` is nonzero when `positive`, zero otherwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Literal {
    positive: bool,
    expr: Expr,
}

impl Literal {
    /// Rewrites `!=`, `>=`, `>` into the negation of `==`, `<`, `<=` so that
    /// complementary literals become syntactically comparable.
    fn canonical(self) -> Literal {
        let Literal { positive, expr } = self;
        match expr {
            Expr::Bin(BinOp::Ne, a, b) => Literal { positive: !positive, expr: Expr::Bin(BinOp::Eq, a, b) },
            Expr::Bin(BinOp::Ge, a, b) => Literal { positive: !positive, expr: Expr::Bin(BinOp::Lt, a, b) },
            Expr::Bin(BinOp::Gt, a, b) => Literal { positive: !positive, expr: Expr::Bin(BinOp::Le, a, b) },
            expr => Literal { positive, expr },
        }
    }

    fn holds(&self, m: &Memory) -> Option<bool> {
        self.expr.eval(m).ok().map(|v| (v != 0) == self.positive)
    }
}

/// Checks `⊨ hypo ⇒ lhs ⊑ rhs`.
///
/// Each valuation of the distinct guards of `lhs` and `rhs` is a case. A
/// case whose levels are ordered passes. Otherwise it must be refuted: a
/// propositional clash, or an integer contradiction found by elimination
/// after substituting equality facts. An unrefuted failing case yields
/// `Violated` when a concrete witness memory is found and `Unknown`
/// otherwise. Only `Valid` should be read as acceptance.
pub fn discharge(hypo: &FactSet, lhs: &Label, rhs: &Label, lat: &Lattice, cfg: &DischargeConfig) -> Verdict {
    let mut guards = Vec::new();
    lhs.collect_guards(&mut guards);
    rhs.collect_guards(&mut guards);
    if guards.len() > cfg.max_guards {
        return Verdict {
            status: Status::Unknown,
            witness: None,
            note: Some(format!("{} guards exceed the limit of {}", guards.len(), cfg.max_guards)),
            cases: 0,
            refuted: 0,
        };
    }

    let base = Hypothesis::new(hypo);
    let mut verdict = Verdict { status: Status::Valid, witness: None, note: None, cases: 0, refuted: 0 };
    for bits in 0u64..(1u64 << guards.len()) {
        verdict.cases += 1;
        let value = |g: &Expr| {
            let i = guards.iter().position(|h| h == g).expect("guard collected");
            bits >> i & 1 == 1
        };
        let l1 = lhs.eval_with(lat, &mut |g| value(g));
        let l2 = rhs.eval_with(lat, &mut |g| value(g));
        if lat.leq(l1, l2) {
            continue;
        }
        let literals: Vec<Literal> =
            guards.iter().enumerate().map(|(i, g)| Literal { positive: bits >> i & 1 == 1, expr: g.clone() }).collect();
        match base.refute(&literals, cfg) {
            Refutation::Refuted => {
                verdict.refuted += 1;
                continue;
            }
            Refutation::Open(why) => {
                let mut vars = base.vars.clone();
                vars.extend(lhs.free_vars());
                vars.extend(rhs.free_vars());
                let check = |m: &Memory| match (lhs.eval(m, lat), rhs.eval(m, lat)) {
                    (Ok(a), Ok(b)) => !lat.leq(a, b),
                    _ => false,
                };
                let seed = cfg.seed ^ bits.wrapping_mul(0x9e37_79b9_7f4a_7c15);
                if let Some(m) = base.find_witness(&literals, &vars, check, cfg.witness_budget, seed) {
                    verdict.status = Status::Violated;
                    verdict.note = Some(format!(
                        "`{}` is not below `{}` in a reachable case",
                        lat.name(l1),
                        lat.name(l2)
                    ));
                    verdict.witness = Some(m);
                    return verdict;
                }
                verdict.status = Status::Unknown;
                verdict.note.get_or_insert(format!(
                    "could not refute the case where `{}` is not below `{}` ({why}), and found no witness",
                    lat.name(l1),
                    lat.name(l2)
                ));
            }
        }
    }
    verdict
}

enum Refutation {
    Refuted,
    /// Not refuted; the string says why.
    Open(&'static str),
}

/// The fact set, preprocessed once per obligation.
struct Hypothesis {
    literals: Vec<Literal>,
    /// Equality facts in an order where each right-hand side only mentions
    /// variables defined earlier or left free.
    defs: Vec<(Var, Expr)>,
    /// Equality facts not usable as definitions; checked on candidates.
    extra_eqs: Vec<(Var, Expr)>,
    subst: BTreeMap<Var, Expr>,
    vars: BTreeSet<Var>,
}

const MAX_SUBST_SIZE: usize = 256;

impl Hypothesis {
    fn new(hypo: &FactSet) -> Self {
        let mut literals = Vec::new();
        let mut eqs = Vec::new();
        for f in hypo.iter() {
            match f {
                Fact::NonZero(e) => literals.push(Literal { positive: true, expr: e.clone() }),
                Fact::Zero(e) => literals.push(Literal { positive: false, expr: e.clone() }),
                Fact::Equals(x, e) => eqs.push((x.clone(), e.clone())),
            }
        }
        // Order definitions so that no definition reads a later target.
        let targets: BTreeSet<Var> = eqs.iter().map(|(x, _)| x.clone()).collect();
        let mut defined = BTreeSet::new();
        let mut defs = Vec::new();
        let mut pending = eqs;
        loop {
            let before = pending.len();
            let mut rest = Vec::new();
            for (x, e) in pending {
                let ready = !defined.contains(&x)
                    && e.vars().iter().all(|v| !targets.contains(v) || defined.contains(v))
                    && !e.mentions(&x);
                if ready {
                    defined.insert(x.clone());
                    defs.push((x, e));
                } else {
                    rest.push((x, e));
                }
            }
            pending = rest;
            if pending.len() == before || pending.is_empty() {
                break;
            }
        }
        let extra_eqs = pending;

        // Substitution closing over the definition order.
        let mut subst: BTreeMap<Var, Expr> = BTreeMap::new();
        for (x, e) in &defs {
            let e = e.substitute(&subst);
            if e.size() <= MAX_SUBST_SIZE {
                subst.insert(x.clone(), e.fold_constants());
            }
        }
        let vars = hypo.vars();
        Hypothesis { literals, defs, extra_eqs, subst, vars }
    }

    fn refute(&self, case: &[Literal], cfg: &DischargeConfig) -> Refutation {
        let mut lits: Vec<Literal> = Vec::new();
        for l in self.literals.iter().chain(case) {
            let expr = l.expr.substitute(&self.subst).fold_constants();
            match expr {
                Expr::Int(n) => {
                    if (n != 0) != l.positive {
                        return Refutation::Refuted;
                    }
                }
                expr => lits.push(Literal { positive: l.positive, expr }.canonical()),
            }
        }
        lits.sort();
        lits.dedup();
        for w in lits.windows(2) {
            if w[0].expr == w[1].expr && w[0].positive != w[1].positive {
                return Refutation::Refuted;
            }
        }

        let mut constraints = Vec::new();
        for l in &lits {
            encode(&l.expr, l.positive, &mut constraints);
        }
        for (x, e) in self.defs.iter().chain(&self.extra_eqs) {
            if let Some(d) = linearize(&Expr::bin(BinOp::Sub, Expr::Var(x.clone()), e.clone())) {
                constraints.push(Constraint::Eq(d));
            }
        }
        match feasible(&constraints, cfg.max_constraints) {
            Feasibility::Infeasible => Refutation::Refuted,
            Feasibility::Unrefuted => Refutation::Open("constraints are satisfiable as far as elimination can tell"),
            Feasibility::Unknown => Refutation::Open("elimination gave up"),
        }
    }

    /// Searches for a memory that satisfies the hypothesis and `case` and
    /// passes `check`. Free variables are enumerated over a small range first,
    /// then sampled; defined variables are computed from their definitions.
    fn find_witness(
        &self,
        case: &[Literal],
        vars: &BTreeSet<Var>,
        check: impl Fn(&Memory) -> bool,
        budget: usize,
        seed: u64,
    ) -> Option<Memory> {
        let defined: BTreeSet<&Var> = self.defs.iter().map(|(x, _)| x).collect();
        let free: Vec<&Var> = vars.iter().filter(|v| !defined.contains(v)).collect();
        let try_values = |vals: &[i64]| -> Option<Memory> {
            let mut m: Memory = free.iter().zip(vals).map(|(v, n)| ((*v).clone(), *n)).collect();
            for (x, e) in &self.defs {
                let n = e.eval(&m).ok()?;
                m.set(x.clone(), n);
            }
            for (x, e) in &self.extra_eqs {
                if m.get(x)? != e.eval(&m).ok()? {
                    return None;
                }
            }
            for l in self.literals.iter().chain(case) {
                if l.holds(&m) != Some(true) {
                    return None;
                }
            }
            check(&m).then_some(m)
        };

        let k = free.len();
        let mut tried = 0;
        // Exhaustive over [-r, r]^k for the largest r that fits half the budget.
        let mut r: i64 = 0;
        while k > 0 && (2 * (r + 1) + 1).checked_pow(k as u32).is_some_and(|n| (n as usize) <= budget / 2) {
            r += 1;
        }
        let width = (2 * r + 1) as usize;
        let total = width.checked_pow(k as u32).unwrap_or(usize::MAX).min(budget);
        let mut vals = vec![0i64; k];
        for idx in 0..total {
            let mut n = idx;
            for v in vals.iter_mut() {
                *v = (n % width) as i64 - r;
                n /= width;
            }
            tried += 1;
            if let Some(m) = try_values(&vals) {
                return Some(m);
            }
        }
        if k == 0 {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while tried < budget {
            let bound = if tried % 2 == 0 { 16 } else { 1000 };
            for v in vals.iter_mut() {
                *v = rng.gen_range(-bound..=bound);
            }
            tried += 1;
            if let Some(m) = try_values(&vals) {
                return Some(m);
            }
        }
        None
    }
}

/// Adds the linear consequences of `expr` being nonzero (`positive`) or zero.
/// Disjunctions and disequalities carry no linear content and are skipped,
/// which only weakens refutation.
fn encode(expr: &Expr, positive: bool, out: &mut Vec<Constraint>) {
    let diff = |a: &Expr, b: &Expr| linearize(&Expr::bin(BinOp::Sub, a.clone(), b.clone()));
    let plus_one = |mut l: super::fm::Linear| {
        l.constant += 1;
        l
    };
    match expr {
        Expr::Bin(BinOp::And, a, b) if positive => {
            encode(a, true, out);
            encode(b, true, out);
        }
        Expr::Bin(BinOp::Or, a, b) if !positive => {
            encode(a, false, out);
            encode(b, false, out);
        }
        Expr::Bin(op, a, b) if op.is_comparison() => {
            // Normalize to a positive comparison.
            let op = if positive {
                *op
            } else {
                match op {
                    BinOp::Eq => BinOp::Ne,
                    BinOp::Ne => BinOp::Eq,
                    BinOp::Lt => BinOp::Ge,
                    BinOp::Le => BinOp::Gt,
                    BinOp::Gt => BinOp::Le,
                    BinOp::Ge => BinOp::Lt,
                    _ => unreachable!(),
                }
            };
            let c = match op {
                // a < b  ⇔  a - b + 1 ≤ 0 over the integers
                BinOp::Lt => diff(a, b).map(|d| Constraint::Le(plus_one(d))),
                BinOp::Le => diff(a, b).map(Constraint::Le),
                BinOp::Gt => diff(b, a).map(|d| Constraint::Le(plus_one(d))),
                BinOp::Ge => diff(b, a).map(Constraint::Le),
                BinOp::Eq => diff(a, b).map(Constraint::Eq),
                _ => None,
            };
            out.extend(c);
        }
        Expr::Bin(BinOp::And | BinOp::Or, ..) => {}
        e if !positive => out.extend(linearize(e).map(Constraint::Eq)),
        _ => {}
    }
}
