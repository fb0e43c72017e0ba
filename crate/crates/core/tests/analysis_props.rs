mod common;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use common::*;
use iflow::analysis::{liveness, predicates, Cfg, FactSet, NodeKind};
use iflow::harness::{gen_labels, random_source_memory, trial_rng};
use iflow::interp::{execute, Exec};
use iflow::lang::{Cmd, Expr, Memory, SiteId, TypingEnv, Var};
use iflow::transform::{transform_program, ActiveSet};
use proptest::prelude::*;

/// Worklist liveness straight from the dataflow equations.
fn oracle(cfg: &Cfg, g: &TypingEnv, a: &ActiveSet) -> (Vec<BTreeSet<Var>>, Vec<BTreeSet<Var>>) {
    let n = cfg.nodes.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in cfg.nodes.iter().enumerate() {
        for s in &node.succ {
            preds[s.0].push(i);
        }
    }
    let uses = |e: &Expr| {
        let mut u = e.vars();
        for v in e.vars() {
            if let Some(t) = g.get(&v) {
                u.extend(t.free_vars());
            }
        }
        u
    };
    let mut inn = vec![BTreeSet::new(); n];
    let mut out = vec![BTreeSet::new(); n];
    let mut work: VecDeque<usize> = (0..n).collect();
    while let Some(i) = work.pop_front() {
        let o: BTreeSet<Var> = cfg.nodes[i].succ.iter().flat_map(|s| inn[s.0].iter().cloned()).collect();
        let new_in: BTreeSet<Var> = match &cfg.nodes[i].kind {
            NodeKind::Assign { target, rhs, .. } => {
                let mut s: BTreeSet<Var> = o.iter().filter(|v| *v != target).cloned().collect();
                s.extend(uses(rhs));
                s
            }
            NodeKind::Guard { guard, .. } => o.union(&uses(guard)).cloned().collect(),
            NodeKind::Exit => a.range(),
        };
        out[i] = o;
        if new_in != inn[i] {
            inn[i] = new_in;
            work.extend(preds[i].iter().copied());
        }
    }
    (inn, out)
}

fn case(seed: u64) -> (Cmd, ActiveSet, TypingEnv) {
    let (lat, ..) = two_point();
    let t = transform_program(&program_from(seed)).unwrap();
    let mut rng = trial_rng(seed, 9);
    let base = gen_labels(&mut rng, &GenConfig::default().vars, &lat, true);
    let labels = iflow::parser::LabelFile::from_env(&base);
    let g = labels.env_for(&t.vars()).unwrap();
    (t.cmd, t.active, g)
}

use iflow::harness::GenConfig;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn liveness_is_the_least_fixpoint(seed in any::<u64>()) {
        let (c, a, g) = case(seed);
        let cfg = Cfg::build(&c);
        let live = liveness(&cfg, &g, &a);
        let (inn, out) = oracle(&cfg, &g, &a);
        for i in 0..cfg.nodes.len() {
            let id = iflow::analysis::NodeId(i);
            prop_assert_eq!(live.node_in(id), &inn[i]);
            prop_assert_eq!(live.node_out(id), &out[i]);
        }
        let nvars = c.vars().len() + g.len();
        prop_assert!(live.rounds() <= cfg.nodes.len() * nvars.max(1) + 1);
    }

    #[test]
    fn facts_after_an_if_are_the_common_exit_facts(s1 in any::<u64>(), s2 in any::<u64>()) {
        let c1 = programs(s1, 2, 0.0).program();
        let c2 = programs(s2, 2, 0.0).program();
        let probe = |v: &str| Cmd::assign(0, v, Expr::var(v));
        let c = Cmd::seq_all([
            Cmd::if_(Expr::var("x"), Cmd::seq(c1, probe("p1")), Cmd::seq(c2, probe("p2"))),
            probe("p3"),
        ]).renumber_sites();
        let sites: BTreeMap<Var, SiteId> = c.assignments().iter().map(|a| (a.target.clone(), a.site)).collect();
        let p = predicates(&c);
        let at = |v: &str| p[&sites[&Var::new(v)]].clone();
        prop_assert_eq!(at("p3"), at("p1").intersect(&at("p2")));
    }
}

#[test]
fn predicates_hold_whenever_their_site_runs() {
    let mut runs = 0;
    let mut checks = 0usize;
    for seed in 0..300u64 {
        let t = transform_program(&program_from(seed)).unwrap();
        let preds = predicates(&t.cmd);
        for k in 0..4u64 {
            let mut rng = trial_rng(seed, k);
            let m0 = random_source_memory(&mut rng, &t.cmd);
            let mut bad: Option<(SiteId, FactSet, Memory)> = None;
            let mut obs = |s: SiteId, m: &Memory| {
                let f = &preds[&s];
                checks += 1;
                if bad.is_none() && f.holds(m) != Ok(true) {
                    bad = Some((s, f.clone(), m.clone()));
                }
            };
            execute(&t.cmd, &m0, Exec { max_steps: 10_000, erase: None, observer: Some(&mut obs) });
            if let Some((s, f, m)) = bad {
                panic!("facts {f} fail at site {s} in {m}\n{}", t.cmd);
            }
            runs += 1;
        }
    }
    assert!(runs >= 1000 && checks > 10_000, "{runs} runs, {checks} checks");
}
