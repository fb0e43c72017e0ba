use std::fmt;

use crate::lang::{Cmd, Expr, SiteId, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Assign { site: SiteId, target: Var, rhs: Expr },
    /// Branch point of an `if` or `while`.
    Guard { guard: Expr, is_loop: bool },
    /// The unique final node.
    Exit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub succ: Vec<NodeId>,
}

/// Statement-level control-flow graph. `skip` contributes no node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub nodes: Vec<Node>,
    pub entry: NodeId,
    pub exit: NodeId,
}

impl Cfg {
    pub fn build(c: &Cmd) -> Cfg {
        let mut cfg = Cfg { nodes: vec![Node { kind: NodeKind::Exit, succ: Vec::new() }], entry: NodeId(0), exit: NodeId(0) };
        cfg.entry = cfg.add(c, NodeId(0));
        cfg
    }

    fn push(&mut self, kind: NodeKind, succ: Vec<NodeId>) -> NodeId {
        self.nodes.push(Node { kind, succ });
        NodeId(self.nodes.len() - 1)
    }

    /// Adds the nodes of `c`, whose successor is `cont`, and returns its entry.
    fn add(&mut self, c: &Cmd, cont: NodeId) -> NodeId {
        match c {
            Cmd::Skip => cont,
            Cmd::Seq(a, b) => {
                let b = self.add(b, cont);
                self.add(a, b)
            }
            Cmd::Assign { site, target, rhs } | Cmd::BracketAssign { site, target, rhs } => {
                self.push(NodeKind::Assign { site: *site, target: target.clone(), rhs: rhs.clone() }, vec![cont])
            }
            Cmd::If { guard, then_branch, else_branch } => {
                let t = self.add(then_branch, cont);
                let e = self.add(else_branch, cont);
                self.push(NodeKind::Guard { guard: guard.clone(), is_loop: false }, vec![t, e])
            }
            Cmd::While { guard, body } => {
                let g = self.push(NodeKind::Guard { guard: guard.clone(), is_loop: true }, Vec::new());
                let b = self.add(body, g);
                self.nodes[g.0].succ = vec![b, cont];
                g
            }
        }
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn site_node(&self, site: SiteId) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| matches!(&n.kind, NodeKind::Assign { site: s, .. } if *s == site))
            .map(NodeId)
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.iter().enumerate().flat_map(|(i, n)| n.succ.iter().map(move |s| (NodeId(i), *s)))
    }
}

impl fmt::Display for Cfg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.nodes.iter().enumerate() {
            let succ: Vec<String> = n.succ.iter().map(|s| s.0.to_string()).collect();
            match &n.kind {
                NodeKind::Assign { site, target, rhs } => write!(f, "{i}: {site} {target} := {rhs}")?,
                NodeKind::Guard { guard, is_loop: true } => write!(f, "{i}: while ({guard})")?,
                NodeKind::Guard { guard, .. } => write!(f, "{i}: if ({guard})")?,
                NodeKind::Exit => write!(f, "{i}: exit")?,
            }
            writeln!(f, " -> [{}]", succ.join(", "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn cfg(s: &str) -> Cfg {
        Cfg::build(&parse_program(s).unwrap().cmd)
    }

    #[test]
    fn straight_line_is_a_chain() {
        let g = cfg("a := 1; b := 2; c := 3;");
        assert_eq!(g.len(), 4);
        let mut n = g.entry;
        for _ in 0..3 {
            assert_eq!(g.node(n).succ.len(), 1);
            n = g.node(n).succ[0];
        }
        assert_eq!(n, g.exit);
        assert!(g.node(g.exit).succ.is_empty());
    }

    #[test]
    fn if_is_a_diamond() {
        let g = cfg("if (x) { a := 1; } else { b := 2; } c := 3;");
        let guard = g.node(g.entry);
        assert!(matches!(guard.kind, NodeKind::Guard { is_loop: false, .. }));
        let join: Vec<NodeId> = guard.succ.iter().map(|s| g.node(*s).succ[0]).collect();
        assert_eq!(join[0], join[1]);
    }

    #[test]
    fn while_has_a_back_edge() {
        let g = cfg("while (x) { a := 1; }");
        let head = g.entry;
        let body = g.node(head).succ[0];
        assert_eq!(g.node(body).succ, vec![head]);
        assert_eq!(g.node(head).succ[1], g.exit);
        let g = cfg("while (x) { skip; }");
        assert_eq!(g.node(g.entry).succ[0], g.entry);
    }

    #[test]
    fn every_site_once() {
        let g = cfg("x := 1; if (x) { y := 2; } while (y) { y := y - 1; }");
        for s in 0..3 {
            assert!(g.site_node(SiteId(s)).is_some());
        }
    }
}
