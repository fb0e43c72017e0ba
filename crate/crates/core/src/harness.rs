//! Random programs, memories and labels, and the differential checks built
//! on them: transformation correctness, noninterference trials and
//! erasure agreement.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::interp::{erasure_run, run, RunOutcome, DEFAULT_MAX_STEPS};
use crate::lang::{low_diff, project_memory, BinOp, Cmd, SiteId, Expr, Label, Lattice, LevelId, LowDiff, Memory, TypingEnv, Var};
use crate::parser::{LabelFile, SourceProgram};
use crate::transform::{transform_program, ActiveSet};
use crate::typecheck::{check_program, CheckOptions, CheckReport};
use crate::{Error, Result};

pub const VALUE_MIN: i64 = -16;
pub const VALUE_MAX: i64 = 16;

/// Per-trial generator: the same (seed, stream) always yields the same values.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardStyle {
    /// `while (v < k) { ...; v := v + 1; }` with a small `k`.
    Counter,
    /// Arbitrary comparisons; loops often diverge.
    Free,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenConfig {
    pub seed: u64,
    pub max_depth: usize,
    pub vars: Vec<Var>,
    pub lit_min: i64,
    pub lit_max: i64,
    pub guard_style: GuardStyle,
    pub bracket_prob: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            max_depth: 3,
            vars: ["h", "l", "x", "y", "z"].into_iter().map(Var::new).collect(),
            lit_min: VALUE_MIN,
            lit_max: VALUE_MAX,
            guard_style: GuardStyle::Counter,
            bracket_prob: 0.3,
        }
    }
}

/// An endless, reproducible stream of random programs.
pub struct ProgramGen {
    cfg: GenConfig,
    rng: ChaCha8Rng,
}

impl ProgramGen {
    pub fn new(cfg: GenConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        ProgramGen { cfg, rng }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn var(&mut self) -> Var {
        self.cfg.vars.choose(&mut self.rng).expect("variable pool is empty").clone()
    }

    fn lit(&mut self) -> i64 {
        self.rng.gen_range(self.cfg.lit_min..=self.cfg.lit_max)
    }

    fn leaf(&mut self) -> Expr {
        if self.rng.gen_bool(0.65) {
            Expr::Var(self.var())
        } else {
            Expr::Int(self.lit())
        }
    }

    pub fn expr(&mut self, depth: usize) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.4) {
            return self.leaf();
        }
        let op = *[
            BinOp::Add,
            BinOp::Add,
            BinOp::Sub,
            BinOp::Sub,
            BinOp::Mul,
            BinOp::Mod,
            BinOp::Lt,
            BinOp::Le,
            BinOp::Gt,
            BinOp::Eq,
            BinOp::Ne,
            BinOp::And,
            BinOp::Or,
        ]
        .choose(&mut self.rng)
        .unwrap();
        let lhs = self.expr(depth - 1);
        let rhs = match op {
            BinOp::Mod => Expr::Int(self.rng.gen_range(2..=5)),
            BinOp::Mul if self.rng.gen_bool(0.7) => Expr::Int(self.rng.gen_range(-3..=3)),
            _ => self.expr(depth - 1),
        };
        Expr::bin(op, lhs, rhs)
    }

    fn guard(&mut self) -> Expr {
        let v = Expr::Var(self.var());
        match self.rng.gen_range(0..4) {
            0 => Expr::bin(BinOp::Eq, Expr::bin(BinOp::Mod, v, Expr::Int(2)), Expr::Int(0)),
            1 => Expr::bin(BinOp::Lt, v, Expr::Var(self.var())),
            _ => {
                let op = *[BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Eq, BinOp::Ne].choose(&mut self.rng).unwrap();
                Expr::bin(op, v, Expr::Int(self.rng.gen_range(-4..=4)))
            }
        }
    }

    fn assign(&mut self, target: Var, rhs: Expr) -> Cmd {
        if self.rng.gen_bool(self.cfg.bracket_prob) {
            Cmd::BracketAssign { site: SiteId(0), target, rhs }
        } else {
            Cmd::Assign { site: SiteId(0), target, rhs }
        }
    }

    fn cmd(&mut self, depth: usize) -> Cmd {
        if depth == 0 {
            let (x, e) = (self.var(), self.expr(2));
            return self.assign(x, e);
        }
        let n = self.rng.gen_range(1..=3);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let c = match self.rng.gen_range(0..10) {
                0..=4 => self.cmd(0),
                5..=7 => {
                    let g = self.guard();
                    let t = self.cmd(depth - 1);
                    let e = if self.rng.gen_bool(0.5) { self.cmd(depth - 1) } else { Cmd::Skip };
                    Cmd::if_(g, t, e)
                }
                _ => self.loop_(depth),
            };
            out.push(c);
        }
        Cmd::seq_all(out)
    }

    fn loop_(&mut self, depth: usize) -> Cmd {
        let body = self.cmd(depth - 1);
        match self.cfg.guard_style {
            GuardStyle::Counter => {
                let v = self.var();
                let k = self.rng.gen_range(0..=4);
                let guard = Expr::bin(BinOp::Lt, Expr::Var(v.clone()), Expr::Int(k));
                let step = self.assign(v.clone(), Expr::bin(BinOp::Add, Expr::Var(v), Expr::Int(1)));
                Cmd::while_(guard, Cmd::seq(body, step))
            }
            GuardStyle::Free => {
                let g = self.guard();
                Cmd::while_(g, body)
            }
        }
    }

    /// Next program, with sites numbered in textual order.
    pub fn program(&mut self) -> Cmd {
        let depth = self.cfg.max_depth;
        self.cmd(depth).renumber_sites()
    }
}

impl Iterator for ProgramGen {
    type Item = Cmd;

    fn next(&mut self) -> Option<Cmd> {
        Some(self.program())
    }
}

/// First program of the stream for `cfg`.
pub fn gen_program(cfg: &GenConfig) -> Cmd {
    ProgramGen::new(cfg.clone()).program()
}

/// Uniform values in the sampling range for `vars`.
pub fn gen_memory<'a>(rng: &mut impl Rng, vars: impl IntoIterator<Item = &'a Var>) -> Memory {
    vars.into_iter().map(|v| (v.clone(), rng.gen_range(VALUE_MIN..=VALUE_MAX))).collect()
}

/// A random two-point environment over `vars`. With `dependent`, some
/// labels are conditionals on comparisons of other variables.
pub fn gen_labels(rng: &mut impl Rng, vars: &[Var], lat: &Lattice, dependent: bool) -> TypingEnv {
    let (lo, hi) = (Label::Level(lat.bottom()), Label::Level(lat.top()));
    let mut env = TypingEnv::new();
    for v in vars {
        let roll = rng.gen_range(0..20);
        let t = if dependent && roll < 5 {
            let others: Vec<&Var> = vars.iter().filter(|w| *w != v).collect();
            match others.choose(rng) {
                Some(w) => {
                    let op = *[BinOp::Lt, BinOp::Gt, BinOp::Eq].choose(rng).unwrap();
                    let g = if rng.gen_bool(0.3) {
                        Expr::bin(BinOp::Eq, Expr::bin(BinOp::Mod, Expr::Var((*w).clone()), Expr::Int(2)), Expr::Int(0))
                    } else {
                        Expr::bin(op, Expr::Var((*w).clone()), Expr::Int(rng.gen_range(-2..=2)))
                    };
                    Label::cond(g, hi.clone(), lo.clone())
                }
                None => hi.clone(),
            }
        } else if roll < 13 {
            lo.clone()
        } else {
            hi.clone()
        };
        env.insert(v.clone(), t);
    }
    env
}

/// Samples `m1`, copies it to `m2` and re-randomizes in `m2` every variable
/// of `randomize` that `view` hides from `obs` in `m1`; retries until the
/// pair is equivalent under `view`. `fixed` holds values shared by both.
pub fn gen_equiv_pair(
    view: &TypingEnv,
    obs: LevelId,
    lat: &Lattice,
    randomize: &[Var],
    fixed: &Memory,
    rng: &mut impl Rng,
    budget: usize,
) -> Option<(Memory, Memory)> {
    for _ in 0..budget {
        let mut m1 = gen_memory(rng, randomize);
        m1.overlay(fixed);
        let mut m2 = m1.clone();
        for v in randomize {
            if fixed.contains(v) {
                continue;
            }
            let hidden = match view.get(v) {
                Some(t) => match t.eval(&m1, lat) {
                    Ok(l) => !lat.leq(l, obs),
                    Err(_) => true,
                },
                None => true,
            };
            if hidden {
                m2.set(v.clone(), rng.gen_range(VALUE_MIN..=VALUE_MAX));
            }
        }
        if let Ok(None) = low_diff(&m1, &m2, view, obs, lat) {
            return Some((m1, m2));
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct NiConfig {
    pub trials: usize,
    pub seed: u64,
    pub max_steps: u64,
    /// Fixed observer; otherwise each trial draws a non-top level.
    pub observer: Option<LevelId>,
    /// Run even if the checker rejects.
    pub force: bool,
    pub resample_budget: usize,
    /// Stop scheduling trials once a counterexample is found.
    pub stop_on_failure: bool,
}

impl Default for NiConfig {
    fn default() -> Self {
        NiConfig {
            trials: 1000,
            seed: 0,
            max_steps: DEFAULT_MAX_STEPS,
            observer: None,
            force: false,
            resample_budget: 50,
            stop_on_failure: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub trial: usize,
    pub observer: String,
    /// First variable (source name) on which the final low views differ.
    pub diff: Option<LowDiff>,
    pub note: String,
    pub initial1: Memory,
    pub initial2: Memory,
    pub final1: Memory,
    pub final2: Memory,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct NiTrialReport {
    pub accepted: bool,
    pub attempted: usize,
    pub passed: usize,
    pub failed: usize,
    pub discarded: usize,
    pub discarded_divergence: usize,
    pub discarded_resample: usize,
    pub discarded_runtime_error: usize,
    pub counterexample: Option<Counterexample>,
}

enum Trial {
    Pass,
    Diverged,
    NoPair,
    Faulted,
    Fail(Box<Counterexample>),
}

/// What one noninterference trial needs from a checked program.
struct NiSetup<'a> {
    source: &'a Cmd,
    report: &'a CheckReport,
    lat: &'a Lattice,
    randomize: Vec<Var>,
    fixed: Memory,
    view_in: TypingEnv,
    view_out: TypingEnv,
    low_levels: Vec<LevelId>,
}

impl NiSetup<'_> {
    fn trial(&self, cfg: &NiConfig, index: usize) -> Trial {
        let mut rng = trial_rng(cfg.seed, index as u64);
        let obs = cfg.observer.unwrap_or_else(|| *self.low_levels.choose(&mut rng).unwrap());
        let Some((m1, m2)) =
            gen_equiv_pair(&self.view_in, obs, self.lat, &self.randomize, &self.fixed, &mut rng, cfg.resample_budget)
        else {
            return Trial::NoPair;
        };
        let ct = &self.report.transformed;
        let run_pair = |m: &Memory| (run(self.source, m, cfg.max_steps), run(ct, m, cfg.max_steps * 4));
        let ((s1, t1), (s2, t2)) = (run_pair(&m1), run_pair(&m2));
        let outcomes = [&s1, &t1, &s2, &t2];
        if outcomes.iter().any(|o| matches!(o, RunOutcome::StepLimit { .. })) {
            return Trial::Diverged;
        }
        if outcomes.iter().any(|o| matches!(o, RunOutcome::RuntimeError { .. })) {
            return Trial::Faulted;
        }
        let fail = |diff: Option<LowDiff>, note: String| {
            Trial::Fail(Box::new(Counterexample {
                trial: index,
                observer: self.lat.name(obs).to_string(),
                diff,
                note,
                initial1: m1.restrict(|v| self.source_var(v)),
                initial2: m2.restrict(|v| self.source_var(v)),
                final1: s1.memory().restrict(|v| self.source_var(v)),
                final2: s2.memory().restrict(|v| self.source_var(v)),
            }))
        };
        for (s, t) in [(&s1, &t1), (&s2, &t2)] {
            match project_memory(t.memory(), &self.report.active) {
                Ok(p) if p == s.memory().restrict(|v| p.contains(v)) => {}
                _ => return fail(None, "transformed run disagrees with the source on the final copies".into()),
            }
        }
        match low_diff(t1.memory(), t2.memory(), &self.view_out, obs, self.lat) {
            Ok(None) => Trial::Pass,
            Ok(Some(mut d)) => {
                if let Some((x, _)) = self.report.active.iter().find(|(_, c)| **c == d.var) {
                    d.var = x.clone();
                }
                let note = format!("final values of `{}` are distinguishable at {}", d.var, self.lat.name(obs));
                fail(Some(d), note)
            }
            Err(_) => Trial::Faulted,
        }
    }

    fn source_var(&self, v: &Var) -> bool {
        !v.is_copy()
    }
}

fn low_levels(lat: &Lattice) -> Vec<LevelId> {
    let v: Vec<LevelId> = lat.levels().filter(|l| *l != lat.top()).collect();
    if v.is_empty() {
        vec![lat.top()]
    } else {
        v
    }
}

/// Noninterference trials for `source` under `labels`. Pairs of initial
/// memories equivalent for a random observer are run through the source
/// program; terminating pairs must end equivalent under the final copies'
/// labels. Initializer headers fix a variable in both memories.
pub fn ni_test(source: &SourceProgram, labels: &LabelFile, lat: &Lattice, cfg: &NiConfig) -> Result<NiTrialReport> {
    let report = check_program(&source.cmd, labels, lat, &CheckOptions::default())?;
    if !report.accepted && !cfg.force {
        return Err(Error::Usage("the checker rejects this program; pass --force to test it anyway".into()));
    }
    let fixed: Memory = source.inits.iter().map(|(v, n)| (v.clone(), *n)).collect();
    Ok(ni_trials(&source.cmd, &report, lat, fixed, cfg))
}

/// Trials against an existing check report, which must belong to `source`.
pub fn ni_trials(source: &Cmd, report: &CheckReport, lat: &Lattice, fixed: Memory, cfg: &NiConfig) -> NiTrialReport {
    let initial_range = report.initial.range();
    let final_range = report.active.range();
    let mut randomize: BTreeSet<Var> = source.vars();
    randomize.extend(report.env.vars().filter(|v| !v.is_copy()).cloned());
    let randomize: Vec<Var> = randomize.into_iter().collect();
    let mut fixed = fixed;
    for v in report.transformed.vars().into_iter().chain(report.env.vars().cloned()) {
        if v.is_copy() && !fixed.contains(&v) {
            fixed.set(v, 0);
        }
    }
    let setup = NiSetup {
        source,
        report,
        lat,
        view_in: report.env.restrict(|v| !v.is_copy() || initial_range.contains(v)),
        view_out: report.env.restrict(|v| final_range.contains(v)),
        randomize,
        fixed,
        low_levels: low_levels(lat),
    };

    let chunk = if cfg.stop_on_failure { 256 } else { cfg.trials.max(1) };
    let mut out = NiTrialReport { accepted: report.accepted, ..Default::default() };
    let mut start = 0;
    while start < cfg.trials {
        let end = (start + chunk).min(cfg.trials);
        let results: Vec<Trial> = (start..end).into_par_iter().map(|i| setup.trial(cfg, i)).collect();
        for r in results {
            out.attempted += 1;
            match r {
                Trial::Pass => out.passed += 1,
                Trial::Diverged => out.discarded_divergence += 1,
                Trial::NoPair => out.discarded_resample += 1,
                Trial::Faulted => out.discarded_runtime_error += 1,
                Trial::Fail(c) => {
                    out.failed += 1;
                    if out.counterexample.is_none() {
                        out.counterexample = Some(*c);
                    }
                }
            }
        }
        start = end;
        if cfg.stop_on_failure && out.failed > 0 {
            break;
        }
    }
    out.discarded = out.discarded_divergence + out.discarded_resample + out.discarded_runtime_error;
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Agreement {
    Agree,
    /// At least one run diverged or both faulted.
    Discarded,
    Disagree { detail: String },
}

/// Runs `c` and its transformation from `m0`; when both terminate the
/// source memory must equal the transformed memory read through α′.
pub fn preservation_trial(c: &Cmd, m0: &Memory, max_steps: u64) -> Result<Agreement> {
    let t = transform_program(c)?;
    let src = run(c, m0, max_steps);
    let tr = run(&t.cmd, m0, max_steps * 4);
    Ok(match (&src, &tr) {
        (RunOutcome::Terminated { memory: ms, .. }, RunOutcome::Terminated { memory: mt, .. }) => {
            let p = project_memory(mt, &t.active)?;
            let s = ms.restrict(|v| p.contains(v));
            if p == s {
                Agreement::Agree
            } else {
                Agreement::Disagree { detail: format!("source {s:?} vs projected {p:?}") }
            }
        }
        (RunOutcome::RuntimeError { .. }, RunOutcome::RuntimeError { .. }) => Agreement::Discarded,
        (RunOutcome::StepLimit { .. }, _) | (_, RunOutcome::StepLimit { .. }) => Agreement::Discarded,
        _ => Agreement::Disagree { detail: format!("source {src:?} vs transformed {tr:?}") },
    })
}

/// Standard and erasure runs of a checked program agree on the final copies.
pub fn erasure_trial(report: &CheckReport, m0: &Memory, max_steps: u64) -> Agreement {
    let ct = &report.transformed;
    let std = run(ct, m0, max_steps);
    let era = erasure_run(ct, m0, &report.env, &report.live, max_steps);
    match (&std, &era) {
        (RunOutcome::Terminated { memory: a, .. }, RunOutcome::Terminated { memory: b, .. }) => {
            for v in report.active.range() {
                if a.get(&v) != b.get(&v) {
                    return Agreement::Disagree { detail: format!("`{v}`: {:?} vs {:?}", a.get(&v), b.get(&v)) };
                }
            }
            Agreement::Agree
        }
        (RunOutcome::StepLimit { .. }, RunOutcome::StepLimit { .. }) => Agreement::Discarded,
        (RunOutcome::RuntimeError { .. }, RunOutcome::RuntimeError { .. }) => Agreement::Discarded,
        _ => Agreement::Disagree { detail: format!("standard {std:?} vs erasure {era:?}") },
    }
}

/// Erasure runs of the transformed program from two memories equivalent on
/// the initial copies; copies outside α are drawn independently.
pub fn erasure_ni_trial(report: &CheckReport, lat: &Lattice, seed: u64, index: usize, max_steps: u64) -> Agreement {
    let mut rng = trial_rng(seed, index as u64);
    let levels = low_levels(lat);
    let obs = *levels.choose(&mut rng).unwrap();
    let initial_range = report.initial.range();
    let mut all: BTreeSet<Var> = report.transformed.vars();
    all.extend(report.env.vars().cloned());
    all.extend(initial_range.iter().cloned());
    let (inside, outside): (Vec<Var>, Vec<Var>) = all.into_iter().partition(|v| initial_range.contains(v) || !v.is_copy());
    let view = report.env.restrict(|v| initial_range.contains(v));
    let Some((mut m1, mut m2)) = gen_equiv_pair(&view, obs, lat, &inside, &Memory::new(), &mut rng, 50) else {
        return Agreement::Discarded;
    };
    m1.overlay(&gen_memory(&mut rng, &outside));
    m2.overlay(&gen_memory(&mut rng, &outside));
    let ct = &report.transformed;
    let r1 = erasure_run(ct, &m1, &report.env, &report.live, max_steps);
    let r2 = erasure_run(ct, &m2, &report.env, &report.live, max_steps);
    match (&r1, &r2) {
        (RunOutcome::Terminated { memory: a, .. }, RunOutcome::Terminated { memory: b, .. }) => {
            let final_range = report.active.range();
            let view_out = report.env.restrict(|v| final_range.contains(v));
            match low_diff(a, b, &view_out, obs, lat) {
                Ok(None) => Agreement::Agree,
                Ok(Some(d)) => Agreement::Disagree { detail: format!("{d:?} from {m1:?} and {m2:?}") },
                Err(_) => Agreement::Discarded,
            }
        }
        _ => Agreement::Discarded,
    }
}

/// A random program together with random labels the checker accepts.
pub struct TypedCase {
    pub source: Cmd,
    pub labels: LabelFile,
    pub report: CheckReport,
}

/// Draws programs and label environments from `gen` until the checker
/// accepts one, giving up after `attempts`.
pub fn gen_typed_case(gen: &mut ProgramGen, lat: &Lattice, dependent: bool, attempts: usize) -> Option<TypedCase> {
    let vars = gen.cfg.vars.clone();
    for _ in 0..attempts {
        let source = gen.program();
        let env = gen_labels(gen.rng(), &vars, lat, dependent);
        let labels = LabelFile::from_env(&env);
        let Ok(report) = check_program(&source, &labels, lat, &CheckOptions::default()) else { continue };
        if report.accepted {
            return Some(TypedCase { source, labels, report });
        }
    }
    None
}

/// Fraction of `n` programs from `cfg` that terminate from the zero memory.
pub fn termination_rate(cfg: &GenConfig, n: usize, max_steps: u64) -> f64 {
    let progs: Vec<Cmd> = ProgramGen::new(cfg.clone()).take(n).collect();
    let ok = progs.par_iter().filter(|c| run(c, &Memory::new(), max_steps).terminated().is_some()).count();
    ok as f64 / n.max(1) as f64
}

/// Initial source memory for `c` with every variable drawn uniformly.
pub fn random_source_memory(rng: &mut impl Rng, c: &Cmd) -> Memory {
    gen_memory(rng, &c.vars())
}

/// Sorted `var=value` listing.
pub fn format_memory(m: &Memory) -> String {
    let parts: Vec<String> = m.iter().map(|(v, n)| format!("{v}={n}")).collect();
    parts.join(", ")
}

/// Copies in the active set whose source names are in `keep`.
pub fn active_subset(a: &ActiveSet, keep: &BTreeSet<Var>) -> BTreeMap<Var, Var> {
    a.iter().filter(|(x, _)| keep.contains(*x)).map(|(x, c)| (x.clone(), c.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_labels, parse_program};

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig { seed: 7, ..Default::default() };
        let a: Vec<Cmd> = ProgramGen::new(cfg.clone()).take(20).collect();
        let b: Vec<Cmd> = ProgramGen::new(cfg).take(20).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn depth_zero_is_one_assignment() {
        let c = gen_program(&GenConfig { seed: 1, max_depth: 0, ..Default::default() });
        assert!(matches!(c, Cmd::Assign { .. } | Cmd::BracketAssign { .. }), "{c:?}");
    }

    #[test]
    fn equivalent_pairs_differ_only_in_secrets() {
        let lat = Lattice::two_point();
        let env = parse_labels("label h : H; label l : L;", &lat).unwrap().to_env();
        let vars = [Var::new("h"), Var::new("l")];
        let mut rng = trial_rng(3, 0);
        for _ in 0..50 {
            let (m1, m2) = gen_equiv_pair(&env, lat.bottom(), &lat, &vars, &Memory::new(), &mut rng, 10).unwrap();
            assert_eq!(m1.get(&"l".into()), m2.get(&"l".into()));
        }
        let (m1, m2) = gen_equiv_pair(&env, lat.top(), &lat, &vars, &Memory::new(), &mut rng, 10).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn dependent_pairs_respect_the_guard() {
        let lat = Lattice::two_point();
        let env = parse_labels("label y : (x > 0 ? H : L); label x : L;", &lat).unwrap().to_env();
        let vars = [Var::new("x"), Var::new("y")];
        let mut rng = trial_rng(5, 0);
        let mut differed = false;
        for _ in 0..200 {
            let (m1, m2) = gen_equiv_pair(&env, lat.bottom(), &lat, &vars, &Memory::new(), &mut rng, 10).unwrap();
            let x = m1.get(&"x".into()).unwrap();
            assert_eq!(x, m2.get(&"x".into()).unwrap());
            if x <= 0 {
                assert_eq!(m1.get(&"y".into()), m2.get(&"y".into()));
            }
            differed |= m1.get(&"y".into()) != m2.get(&"y".into());
        }
        assert!(differed);
    }

    #[test]
    fn leaky_program_has_a_counterexample() {
        let lat = Lattice::two_point();
        let src = parse_program("l := h;").unwrap();
        let labels = parse_labels("label h : H; label l : L;", &lat).unwrap();
        assert!(matches!(ni_test(&src, &labels, &lat, &NiConfig::default()), Err(Error::Usage(_))));
        let cfg = NiConfig { trials: 200, force: true, ..Default::default() };
        let r = ni_test(&src, &labels, &lat, &cfg).unwrap();
        assert!(!r.accepted);
        assert!(r.failed > 0);
        assert_eq!(r.passed + r.failed + r.discarded, r.attempted);
        let cx = r.counterexample.unwrap();
        assert_eq!(cx.diff.unwrap().var, Var::new("l"));
    }

    #[test]
    fn secure_program_passes() {
        let lat = Lattice::two_point();
        let src = parse_program("x := h; [x := 0]; l := x;").unwrap();
        let labels = parse_labels("label h : H; label l : L; label x : H; label x@1 : L;", &lat).unwrap();
        let r = ni_test(&src, &labels, &lat, &NiConfig { trials: 300, ..Default::default() });
        let r = r.unwrap();
        assert_eq!(r.failed, 0, "{r:?}");
        assert_eq!(r.passed, 300);
    }

    #[test]
    fn trials_are_reproducible() {
        let lat = Lattice::two_point();
        let src = parse_program("if (h > 3) { l := 1; }").unwrap();
        let labels = parse_labels("label h : H; label l : L;", &lat).unwrap();
        let cfg = NiConfig { trials: 100, force: true, seed: 9, ..Default::default() };
        let a = ni_test(&src, &labels, &lat, &cfg).unwrap();
        let b = ni_test(&src, &labels, &lat, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.failed > 0);
    }

    #[test]
    fn preservation_on_a_loop() {
        let c = parse_program("i := 0; while (i < 3) { [s := s + i]; i := i + 1; } [s := s * 2];").unwrap().cmd;
        let m0: Memory = [(Var::new("s"), 1), (Var::new("i"), 0)].into_iter().collect();
        assert_eq!(preservation_trial(&c, &m0, 1000).unwrap(), Agreement::Agree);
    }
}
