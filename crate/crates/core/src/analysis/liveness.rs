use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::cfg::{Cfg, NodeId, NodeKind};
use crate::lang::{Expr, SiteId, TypingEnv, Var};
use crate::transform::ActiveSet;

/// Live variables before and after every assignment site, and at every node.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LivenessMap {
    before: BTreeMap<SiteId, BTreeSet<Var>>,
    after: BTreeMap<SiteId, BTreeSet<Var>>,
    node_in: Vec<BTreeSet<Var>>,
    node_out: Vec<BTreeSet<Var>>,
    rounds: usize,
}

#[derive(Serialize)]
pub struct SiteLiveness<'a> {
    pub site: SiteId,
    pub before: &'a BTreeSet<Var>,
    pub after: &'a BTreeSet<Var>,
}

impl LivenessMap {
    pub fn before(&self, site: SiteId) -> Option<&BTreeSet<Var>> {
        self.before.get(&site)
    }

    pub fn after(&self, site: SiteId) -> Option<&BTreeSet<Var>> {
        self.after.get(&site)
    }

    pub fn node_in(&self, n: NodeId) -> &BTreeSet<Var> {
        &self.node_in[n.0]
    }

    pub fn node_out(&self, n: NodeId) -> &BTreeSet<Var> {
        &self.node_out[n.0]
    }

    /// Sweeps needed to reach the fixpoint (the last one changes nothing).
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn sites(&self) -> impl Iterator<Item = SiteLiveness<'_>> {
        self.before.iter().map(|(s, b)| SiteLiveness { site: *s, before: b, after: &self.after[s] })
    }
}

/// Variables read by `e`, together with the variables their labels read.
fn uses(e: &Expr, g: &TypingEnv) -> BTreeSet<Var> {
    let mut out = e.vars();
    for v in e.vars() {
        out.extend(g.label_vars(&v));
    }
    out
}

/// Backward liveness over `cfg`. The final node's live-in is the range of
/// `a_final`. Assignments generate the variables of the right-hand side and
/// of their labels and kill the assignee; guards generate the same way and
/// kill nothing.
pub fn liveness(cfg: &Cfg, g: &TypingEnv, a_final: &ActiveSet) -> LivenessMap {
    let n = cfg.len();
    let mut gen = Vec::with_capacity(n);
    let mut kill: Vec<Option<&Var>> = Vec::with_capacity(n);
    for node in &cfg.nodes {
        match &node.kind {
            NodeKind::Assign { target, rhs, .. } => {
                gen.push(uses(rhs, g));
                kill.push(Some(target));
            }
            NodeKind::Guard { guard, .. } => {
                gen.push(uses(guard, g));
                kill.push(None);
            }
            NodeKind::Exit => {
                gen.push(a_final.range());
                kill.push(None);
            }
        }
    }
    let mut live_in: Vec<BTreeSet<Var>> = vec![BTreeSet::new(); n];
    let mut live_out: Vec<BTreeSet<Var>> = vec![BTreeSet::new(); n];
    let mut rounds = 0;
    loop {
        rounds += 1;
        let mut changed = false;
        // Nodes are created in reverse program order, so ascending ids
        // visit successors first for forward edges.
        for i in 0..n {
            let mut out = BTreeSet::new();
            for s in &cfg.nodes[i].succ {
                out.extend(live_in[s.0].iter().cloned());
            }
            let mut inn = out.clone();
            if let Some(k) = kill[i] {
                inn.remove(k);
            }
            inn.extend(gen[i].iter().cloned());
            if inn != live_in[i] || out != live_out[i] {
                changed = true;
                live_in[i] = inn;
                live_out[i] = out;
            }
        }
        if !changed {
            break;
        }
    }
    let mut before = BTreeMap::new();
    let mut after = BTreeMap::new();
    for (i, node) in cfg.nodes.iter().enumerate() {
        if let NodeKind::Assign { site, .. } = node.kind {
            before.insert(site, live_in[i].clone());
            after.insert(site, live_out[i].clone());
        }
    }
    LivenessMap { before, after, node_in: live_in, node_out: live_out, rounds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{Label, Lattice};
    use crate::parser::parse_program;
    use crate::transform::transform_program;

    fn vars(names: &[&str]) -> BTreeSet<Var> {
        names.iter().map(|s| Var::new(s)).collect()
    }

    #[test]
    fn single_assignment() {
        let c = parse_program("x := 1;").unwrap().cmd;
        let t = transform_program(&c).unwrap();
        let live = liveness(&Cfg::build(&t.cmd), &TypingEnv::new(), &t.active);
        assert_eq!(live.before(SiteId(0)), Some(&vars(&[])));
        assert_eq!(live.after(SiteId(0)), Some(&vars(&["x"])));
    }

    #[test]
    fn label_variables_are_generated() {
        let lat = Lattice::two_point();
        let c = parse_program("l := y; x := 0;").unwrap().cmd;
        let t = transform_program(&c).unwrap();
        let mut g = TypingEnv::with_default(Label::Level(lat.bottom()));
        g.insert("y".into(), Label::cond(Expr::var("x"), Label::Level(lat.top()), Label::Level(lat.bottom())));
        let live = liveness(&Cfg::build(&t.cmd), &g, &t.active);
        assert!(live.before(SiteId(0)).unwrap().contains(&Var::new("x")));
        assert!(!live.before(SiteId(1)).unwrap().contains(&Var::new("x")));
    }

    #[test]
    fn loops_reach_a_fixpoint() {
        let c = parse_program("a := 0; while (i < 3) { b := a; a := c; i := i + 1; } l := b;").unwrap().cmd;
        let t = transform_program(&c).unwrap();
        let live = liveness(&Cfg::build(&t.cmd), &TypingEnv::new(), &t.active);
        // `c` flows into `a` then into `b` on the next iteration.
        assert!(live.before(SiteId(0)).unwrap().contains(&Var::new("c")));
        assert!(live.rounds() >= 2);
    }
}
