use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::discharge::{discharge, DischargeConfig, Status, Verdict};
use crate::analysis::{liveness, predicates, Cfg, FactSet, LivenessMap};
use crate::lang::{env_wellformed, Cmd, Expr, Label, Lattice, Memory, SiteId, TypingEnv, Var, WfViolation};
use crate::parser::LabelFile;
use crate::transform::{transform_program, ActiveSet};
use crate::{Error, Result};

/// Label of an expression: literals are bottom, variables their label,
/// operators the join of their operands.
pub fn type_of_expr(g: &TypingEnv, e: &Expr, lat: &Lattice) -> Result<Label> {
    match e {
        Expr::Int(_) => Ok(Label::Level(lat.bottom())),
        Expr::Var(x) => g.get(x).cloned().ok_or_else(|| Error::Unbound(x.clone())),
        Expr::Bin(_, a, b) => Ok(Label::join(type_of_expr(g, a, lat)?, type_of_expr(g, b, lat)?)),
    }
}

/// `⊨ hypothesis ⇒ lhs ⊑ rhs` for one assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Obligation {
    pub site: SiteId,
    pub line: Option<usize>,
    pub target: Var,
    pub hypothesis: FactSet,
    pub lhs: Label,
    pub rhs: Label,
    pub verdict: Verdict,
}

/// An assignment to `assignee` while `dependent`, whose label mentions it,
/// is still live.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SideFailure {
    pub site: SiteId,
    pub line: Option<usize>,
    pub assignee: Var,
    pub dependent: Var,
}

/// Obligations and side-condition failures of one command, before discharge.
#[derive(Debug, Clone, Default)]
pub struct Collected {
    pub pending: Vec<(SiteId, Var, FactSet, Label, Label)>,
    pub side_failures: Vec<SideFailure>,
}

/// Walks `c` under `pc`, collecting one obligation per assignment and
/// checking the liveness side condition.
pub fn check_cmd(
    g: &TypingEnv,
    pc: &Label,
    c: &Cmd,
    preds: &BTreeMap<SiteId, FactSet>,
    live: &LivenessMap,
    lat: &Lattice,
    out: &mut Collected,
) -> Result<()> {
    match c {
        Cmd::Skip => Ok(()),
        Cmd::Seq(a, b) => {
            check_cmd(g, pc, a, preds, live, lat, out)?;
            check_cmd(g, pc, b, preds, live, lat, out)
        }
        Cmd::Assign { site, target, rhs } | Cmd::BracketAssign { site, target, rhs } => {
            let tau = type_of_expr(g, rhs, lat)?;
            let gx = g.get(target).cloned().ok_or_else(|| Error::MissingLabel(target.clone()))?;
            let hypo = preds.get(site).cloned().unwrap_or_default();
            out.pending.push((*site, target.clone(), hypo, Label::join(tau, pc.clone()).simplify(lat), gx));
            if let Some(after) = live.after(*site) {
                for v in after {
                    if g.get(v).is_some_and(|t| t.mentions(target)) {
                        out.side_failures.push(SideFailure {
                            site: *site,
                            line: None,
                            assignee: target.clone(),
                            dependent: v.clone(),
                        });
                    }
                }
            }
            Ok(())
        }
        Cmd::If { guard, then_branch, else_branch } => {
            let pc2 = Label::join(pc.clone(), type_of_expr(g, guard, lat)?).simplify(lat);
            check_cmd(g, &pc2, then_branch, preds, live, lat, out)?;
            check_cmd(g, &pc2, else_branch, preds, live, lat, out)
        }
        Cmd::While { guard, body } => {
            let pc2 = Label::join(pc.clone(), type_of_expr(g, guard, lat)?).simplify(lat);
            check_cmd(g, &pc2, body, preds, live, lat, out)
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    /// Require every label to be a bare level.
    pub levels_only: bool,
    pub discharge: DischargeConfig,
    /// Top-level context label; bottom when absent.
    pub pc: Option<Label>,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub accepted: bool,
    pub obligations: Vec<Obligation>,
    pub side_failures: Vec<SideFailure>,
    pub wf_violations: Vec<WfViolation>,
    pub transformed: Cmd,
    pub initial: ActiveSet,
    pub active: ActiveSet,
    pub env: TypingEnv,
    pub live: LivenessMap,
}

impl CheckReport {
    pub fn failed_obligations(&self) -> impl Iterator<Item = &Obligation> {
        self.obligations.iter().filter(|o| o.verdict.status != Status::Valid)
    }

    /// Fills in source lines for sites found in `lines`.
    pub fn annotate_lines(&mut self, lines: &BTreeMap<SiteId, usize>) {
        for o in &mut self.obligations {
            o.line = lines.get(&o.site).copied();
        }
        for s in &mut self.side_failures {
            s.line = lines.get(&s.site).copied();
        }
    }

    pub fn view<'a>(&'a self, lat: &Lattice) -> ReportView<'a> {
        ReportView {
            verdict: if self.accepted { "accept" } else { "reject" },
            obligations: self
                .obligations
                .iter()
                .map(|o| ObligationView {
                    site: o.site.0,
                    line: o.line,
                    target: &o.target,
                    hypothesis: o.hypothesis.iter().map(ToString::to_string).collect(),
                    lhs: o.lhs.display(lat).to_string(),
                    rhs: o.rhs.display(lat).to_string(),
                    status: o.verdict.status,
                    witness: o.verdict.witness.as_ref(),
                    note: o.verdict.note.as_deref(),
                })
                .collect(),
            side_failures: &self.side_failures,
            wf_violations: &self.wf_violations,
            active: &self.active,
        }
    }

    pub fn render_text(&self, lat: &Lattice) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", if self.accepted { "ACCEPT" } else { "REJECT" });
        for w in &self.wf_violations {
            let _ = writeln!(s, "  ill-formed environment: {w}");
        }
        for f in &self.side_failures {
            let _ = writeln!(
                s,
                "  {}: assignment to `{}` changes the label of live variable `{}`",
                place(f.site, f.line),
                f.assignee,
                f.dependent
            );
        }
        for o in &self.obligations {
            let status = match o.verdict.status {
                Status::Valid => "valid",
                Status::Violated => "VIOLATED",
                Status::Unknown => "UNKNOWN",
            };
            let _ = write!(
                s,
                "  {}: {} |= {} <= {}  [{status}]",
                place(o.site, o.line),
                o.hypothesis,
                o.lhs.display(lat),
                o.rhs.display(lat)
            );
            if let Some(w) = &o.verdict.witness {
                let _ = write!(s, " witness {w}");
            }
            s.push('\n');
        }
        s
    }
}

fn place(site: SiteId, line: Option<usize>) -> String {
    match line {
        Some(l) => format!("line {l}"),
        None => format!("site {}", site.0),
    }
}

#[derive(Serialize)]
pub struct ReportView<'a> {
    pub verdict: &'static str,
    pub obligations: Vec<ObligationView<'a>>,
    pub side_failures: &'a [SideFailure],
    pub wf_violations: &'a [WfViolation],
    pub active: &'a ActiveSet,
}

#[derive(Serialize)]
pub struct ObligationView<'a> {
    pub site: u32,
    pub line: Option<usize>,
    pub target: &'a Var,
    pub hypothesis: Vec<String>,
    pub lhs: String,
    pub rhs: String,
    pub status: Status,
    pub witness: Option<&'a Memory>,
    pub note: Option<&'a str>,
}

/// Checks an already transformed program `ct` with final active set
/// `active` against `env`.
pub fn check_transformed(
    ct: &Cmd,
    initial: &ActiveSet,
    active: &ActiveSet,
    env: &TypingEnv,
    lat: &Lattice,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    if opts.levels_only && !env.is_levels_only() {
        let bad = env.entries().find(|(_, t)| !t.is_level()).map(|(x, _)| x.to_string());
        return Err(Error::Config(format!(
            "levels-only mode requires bare levels, but `{}` has a dependent label",
            bad.unwrap_or_else(|| "default".into())
        )));
    }
    let wf_violations = env_wellformed(env, lat).err().unwrap_or_default();
    let cfg = Cfg::build(ct);
    let live = liveness(&cfg, env, active);
    let preds = predicates(ct);
    let pc = opts.pc.clone().unwrap_or(Label::Level(lat.bottom()));
    let mut collected = Collected::default();
    check_cmd(env, &pc, ct, &preds, &live, lat, &mut collected)?;
    let obligations: Vec<Obligation> = collected
        .pending
        .into_par_iter()
        .map(|(site, target, hypothesis, lhs, rhs)| {
            let verdict = discharge(&hypothesis, &lhs, &rhs, lat, &opts.discharge);
            Obligation { site, line: None, target, hypothesis, lhs, rhs, verdict }
        })
        .collect();
    let accepted = wf_violations.is_empty()
        && collected.side_failures.is_empty()
        && obligations.iter().all(|o| o.verdict.status == Status::Valid);
    Ok(CheckReport {
        accepted,
        obligations,
        side_failures: collected.side_failures,
        wf_violations,
        transformed: ct.clone(),
        initial: initial.clone(),
        active: active.clone(),
        env: env.clone(),
        live,
    })
}

/// Labels for every variable of a transformed program (and of their labels).
pub fn resolve_env(labels: &LabelFile, vars: &BTreeSet<Var>) -> Result<TypingEnv> {
    labels.env_for(vars)
}

/// Transforms `source` from the identity active set, resolves labels onto
/// the transformed variables, and type checks the result.
pub fn check_program(source: &Cmd, labels: &LabelFile, lat: &Lattice, opts: &CheckOptions) -> Result<CheckReport> {
    let t = transform_program(source)?;
    let env = resolve_env(labels, &t.vars())?;
    check_transformed(&t.cmd, &t.initial, &t.active, &env, lat, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_labels, parse_program};

    fn check(src: &str, labels: &str) -> CheckReport {
        let lat = Lattice::two_point();
        let sp = parse_program(src).unwrap();
        let mut r = check_program(&sp.cmd, &parse_labels(labels, &lat).unwrap(), &lat, &CheckOptions::default()).unwrap();
        r.annotate_lines(&sp.site_lines);
        r
    }

    #[test]
    fn expression_types() {
        let lat = Lattice::two_point();
        let g = parse_labels("label y : (l1 < 0 ? H : L); label a : L; label b : H;", &lat).unwrap().to_env();
        assert_eq!(type_of_expr(&g, &Expr::var("y"), &lat).unwrap(), g.get(&"y".into()).unwrap().clone());
        assert_eq!(type_of_expr(&g, &Expr::Int(5), &lat).unwrap(), Label::Level(lat.bottom()));
        let t = type_of_expr(&g, &crate::parser::parse_expr("a + b").unwrap(), &lat).unwrap();
        assert_eq!(t, Label::join(Label::Level(lat.bottom()), Label::Level(lat.top())));
        assert!(type_of_expr(&g, &Expr::var("q"), &lat).is_err());
    }

    #[test]
    fn explicit_flow_is_rejected() {
        let r = check("l := h;", "label h : H; label l : L;");
        assert!(!r.accepted);
        assert_eq!(r.failed_obligations().count(), 1);
    }

    #[test]
    fn implicit_flow_is_rejected() {
        let r = check("if (h > 0) { l := 1; }", "label h : H; label l : L;");
        assert!(!r.accepted);
    }

    #[test]
    fn bracket_splits_the_label() {
        let r = check("x := h; [x := 0]; l := x;", "label h : H; label l : L; label x : H; label x@1 : L;");
        assert!(r.accepted, "{}", r.render_text(&Lattice::two_point()));
        let r = check("x := h; x := 0; l := x;", "label h : H; label l : L; label x : H;");
        assert!(!r.accepted);
    }

    #[test]
    fn skip_has_no_obligations() {
        let r = check("skip;", "default : L;");
        assert!(r.accepted);
        assert!(r.obligations.is_empty());
    }

    #[test]
    fn side_condition_reports_line() {
        let r = check(
            "x := 0;\nwhile (x < 10) {\n if (x % 2 == 0) {\n  y := h;\n } else {\n  l := y;\n }\n x := x + 1;\n}",
            "label x : L; label y : (x % 2 == 0 ? H : L); label h : H; label l : L;",
        );
        assert!(!r.accepted);
        assert!(r.side_failures.iter().any(|f| f.line == Some(8) && f.dependent == Var::new("y")), "{:?}", r.side_failures);
    }

    #[test]
    fn levels_only_mode_refuses_dependent_labels() {
        let lat = Lattice::two_point();
        let labels = parse_labels("label y : (x > 0 ? H : L); default : L;", &lat).unwrap();
        let opts = CheckOptions { levels_only: true, ..Default::default() };
        let c = parse_program("y := 1;").unwrap().cmd;
        assert!(matches!(check_program(&c, &labels, &lat, &opts), Err(Error::Config(_))));
    }
}
