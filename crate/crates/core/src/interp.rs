//! Small-step execution under the standard and the erasure semantics.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::analysis::LivenessMap;
use crate::lang::{Cmd, Expr, Memory, RuntimeError, SiteId, TypingEnv, Var};

pub const DEFAULT_MAX_STEPS: u64 = 10_000;

/// A configuration: memory, residual command and the number of steps taken.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub memory: Memory,
    pub cmd: Arc<Cmd>,
    pub steps: u64,
}

impl Config {
    pub fn new(cmd: &Cmd, memory: Memory) -> Self {
        Config { memory, cmd: Arc::new(cmd.clone()), steps: 0 }
    }

    pub fn is_final(&self) -> bool {
        *self.cmd == Cmd::Skip
    }
}

/// An expression that failed to evaluate, and where.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fault {
    pub site: Option<SiteId>,
    pub expr: Expr,
    pub error: RuntimeError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RunOutcome {
    Terminated { memory: Memory, steps: u64 },
    StepLimit { memory: Memory, steps: u64 },
    RuntimeError { memory: Memory, fault: Fault },
}

impl RunOutcome {
    pub fn terminated(&self) -> Option<&Memory> {
        match self {
            RunOutcome::Terminated { memory, .. } => Some(memory),
            _ => None,
        }
    }

    pub fn memory(&self) -> &Memory {
        match self {
            RunOutcome::Terminated { memory, .. }
            | RunOutcome::StepLimit { memory, .. }
            | RunOutcome::RuntimeError { memory, .. } => memory,
        }
    }
}

/// Variables to zero after each assignment site, for the erasure semantics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EraseTable(BTreeMap<SiteId, Vec<Var>>);

impl EraseTable {
    /// For each site `x := e`, the variables `v` whose label mentions `x` and
    /// that are dead right after the site. `universe` lists the candidates.
    pub fn new<'a>(c: &Cmd, g: &TypingEnv, live: &LivenessMap, universe: impl IntoIterator<Item = &'a Var>) -> Self {
        let universe: Vec<&Var> = universe.into_iter().collect();
        let mut table = BTreeMap::new();
        c.for_each_assign(&mut |a| {
            let after = live.after(a.site);
            let erased: Vec<Var> = universe
                .iter()
                .filter(|v| g.get(v).is_some_and(|t| t.mentions(a.target)))
                .filter(|v| !after.is_some_and(|s| s.contains(**v)))
                .map(|v| (*v).clone())
                .collect();
            if !erased.is_empty() {
                table.insert(a.site, erased);
            }
        });
        EraseTable(table)
    }

    pub fn at(&self, site: SiteId) -> &[Var] {
        self.0.get(&site).map_or(&[], Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn eval(e: &Expr, m: &Memory, site: Option<SiteId>) -> Result<i64, Fault> {
    e.eval(m).map_err(|error| Fault { site, expr: e.clone(), error })
}

/// One transition. Returns the site of the assignment executed, if any.
/// Calling this on a final configuration is a no-op.
pub fn step(cfg: &mut Config) -> Result<Option<SiteId>, Fault> {
    let (next, site) = step_cmd(&cfg.cmd, &mut cfg.memory)?;
    if let Some(next) = next {
        cfg.cmd = next;
        cfg.steps += 1;
    }
    Ok(site)
}

fn skip() -> Arc<Cmd> {
    Arc::new(Cmd::Skip)
}

type Stepped = (Option<Arc<Cmd>>, Option<SiteId>);

fn step_cmd(c: &Arc<Cmd>, m: &mut Memory) -> Result<Stepped, Fault> {
    Ok(match &**c {
        Cmd::Skip => (None, None),
        Cmd::Seq(c1, c2) => {
            if **c1 == Cmd::Skip {
                (Some(c2.clone()), None)
            } else {
                let (n1, site) = step_cmd(c1, m)?;
                let n1 = n1.expect("non-skip command always steps");
                (Some(Arc::new(Cmd::Seq(n1, c2.clone()))), site)
            }
        }
        Cmd::Assign { site, target, rhs } | Cmd::BracketAssign { site, target, rhs } => {
            let v = eval(rhs, m, Some(*site))?;
            m.set(target.clone(), v);
            (Some(skip()), Some(*site))
        }
        Cmd::If { guard, then_branch, else_branch } => {
            let v = eval(guard, m, None)?;
            (Some(if v != 0 { then_branch.clone() } else { else_branch.clone() }), None)
        }
        Cmd::While { guard, body } => {
            let unrolled = Cmd::If {
                guard: guard.clone(),
                then_branch: Arc::new(Cmd::Seq(body.clone(), c.clone())),
                else_branch: skip(),
            };
            (Some(Arc::new(unrolled)), None)
        }
    })
}

/// Options for [`execute`].
pub struct Exec<'a> {
    pub max_steps: u64,
    pub erase: Option<&'a EraseTable>,
    /// Called just before each assignment executes, with its site and the
    /// memory at that point.
    pub observer: Option<&'a mut dyn FnMut(SiteId, &Memory)>,
}

impl Exec<'_> {
    pub fn new(max_steps: u64) -> Self {
        Exec { max_steps, erase: None, observer: None }
    }
}

/// Runs `c` from `m0`. Program variables missing from `m0` start at 0.
pub fn execute(c: &Cmd, m0: &Memory, mut opts: Exec<'_>) -> RunOutcome {
    let mut memory = m0.clone();
    for v in c.vars() {
        if !memory.contains(&v) {
            memory.set(v, 0);
        }
    }
    let mut cfg = Config::new(c, memory);
    while !cfg.is_final() {
        if cfg.steps >= opts.max_steps {
            return RunOutcome::StepLimit { memory: cfg.memory, steps: cfg.steps };
        }
        if let Some(obs) = opts.observer.as_mut() {
            if let Some(site) = next_site(&cfg.cmd) {
                obs(site, &cfg.memory);
            }
        }
        match step(&mut cfg) {
            Ok(Some(site)) => {
                if let Some(table) = opts.erase {
                    for v in table.at(site) {
                        cfg.memory.set(v.clone(), 0);
                    }
                }
            }
            Ok(None) => {}
            Err(fault) => return RunOutcome::RuntimeError { memory: cfg.memory, fault },
        }
    }
    RunOutcome::Terminated { memory: cfg.memory, steps: cfg.steps }
}

/// Site of the assignment the next step would execute.
fn next_site(c: &Cmd) -> Option<SiteId> {
    match c {
        Cmd::Seq(c1, _) => next_site(c1),
        Cmd::Assign { site, .. } | Cmd::BracketAssign { site, .. } => Some(*site),
        _ => None,
    }
}

/// Standard semantics.
pub fn run(c: &Cmd, m0: &Memory, max_steps: u64) -> RunOutcome {
    execute(c, m0, Exec::new(max_steps))
}

/// Erasure semantics: after assigning `x` at site η, every variable whose
/// label mentions `x` and that is dead after η is set to 0.
pub fn erasure_run(c: &Cmd, m0: &Memory, g: &TypingEnv, live: &LivenessMap, max_steps: u64) -> RunOutcome {
    let mut universe = c.vars();
    universe.extend(m0.vars().cloned());
    universe.extend(g.vars().cloned());
    let table = EraseTable::new(c, g, live, &universe);
    execute(c, m0, Exec { max_steps, erase: Some(&table), observer: None })
}
