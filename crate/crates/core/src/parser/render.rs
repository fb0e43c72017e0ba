use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::lang::{Cmd, Expr, Label, Lattice, Var};
use crate::transform::ActiveSet;

use super::LabelFile;

/// Writes `e`, parenthesizing it when its operator binds looser than `min_prec`.
pub fn write_expr(f: &mut impl fmt::Write, e: &Expr, min_prec: u8) -> fmt::Result {
    match e {
        Expr::Int(n) => write!(f, "{n}"),
        Expr::Var(x) => write!(f, "{x}"),
        Expr::Bin(op, l, r) => {
            let p = op.precedence();
            let paren = p < min_prec;
            if paren {
                f.write_char('(')?;
            }
            write_expr(f, l, p)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(f, r, p + 1)?;
            if paren {
                f.write_char(')')?;
            }
            Ok(())
        }
    }
}

/// Writes a label in the `.labels` syntax. `/\` binds tighter than `\/`.
pub fn write_label(f: &mut impl fmt::Write, t: &Label, lat: &Lattice, min_prec: u8) -> fmt::Result {
    let (p, l, r, sym) = match t {
        Label::Level(l) => return f.write_str(lat.name(*l)),
        Label::Cond(g, a, b) => {
            f.write_char('(')?;
            write_expr(f, g, 0)?;
            f.write_str(" ? ")?;
            write_label(f, a, lat, 0)?;
            f.write_str(" : ")?;
            write_label(f, b, lat, 0)?;
            return f.write_char(')');
        }
        Label::Join(a, b) => (1, a, b, "\\/"),
        Label::Meet(a, b) => (2, a, b, "/\\"),
    };
    let paren = p < min_prec;
    if paren {
        f.write_char('(')?;
    }
    write_label(f, l, lat, p)?;
    write!(f, " {sym} ")?;
    write_label(f, r, lat, p + 1)?;
    if paren {
        f.write_char(')')?;
    }
    Ok(())
}

/// Canonical text of a program. With an active set, the text starts with one
/// `#active x = x@k` comment per entry.
pub fn render_program(c: &Cmd, active: Option<&ActiveSet>) -> String {
    let mut out = String::new();
    if let Some(a) = active {
        for (x, copy) in a.iter() {
            let _ = writeln!(out, "#active {x} = {copy}");
        }
    }
    write_block(&mut out, c, 0);
    out
}

/// `init x = n;` lines.
pub fn render_inits(inits: &BTreeMap<Var, i64>) -> String {
    inits.iter().map(|(x, n)| format!("init {x} = {n};\n")).collect()
}

/// A label file listing every rule, then the default if present.
pub fn render_labels(file: &LabelFile, lat: &Lattice) -> String {
    let mut out = String::new();
    if let Some(path) = &file.lattice {
        let _ = writeln!(out, "lattice {path:?};");
    }
    for (x, t) in &file.rules {
        let _ = writeln!(out, "label {x} : {};", t.display(lat));
    }
    if let Some(t) = &file.default {
        let _ = writeln!(out, "default : {};", t.display(lat));
    }
    out
}

fn write_block(out: &mut String, c: &Cmd, depth: usize) {
    match c {
        Cmd::Seq(a, b) => {
            write_block(out, a, depth);
            write_block(out, b, depth);
        }
        _ => write_stmt(out, c, depth),
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_stmt(out: &mut String, c: &Cmd, depth: usize) {
    indent(out, depth);
    match c {
        Cmd::Skip => out.push_str("skip;\n"),
        Cmd::Seq(..) => unreachable!("sequences are flattened by write_block"),
        Cmd::Assign { target, rhs, .. } => {
            let _ = writeln!(out, "{target} := {rhs};");
        }
        Cmd::BracketAssign { target, rhs, .. } => {
            let _ = writeln!(out, "[{target} := {rhs}];");
        }
        Cmd::If { guard, then_branch, else_branch } => {
            let _ = writeln!(out, "if ({guard}) {{");
            write_block(out, then_branch, depth + 1);
            indent(out, depth);
            if **else_branch == Cmd::Skip {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                write_block(out, else_branch, depth + 1);
                indent(out, depth);
                out.push_str("}\n");
            }
        }
        Cmd::While { guard, body } => {
            let _ = writeln!(out, "while ({guard}) {{");
            write_block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expr, parse_program};

    #[test]
    fn skip_renders_as_skip() {
        assert_eq!(render_program(&Cmd::Skip, None), "skip;\n");
    }

    #[test]
    fn canonical_layout() {
        let src = "x:=h;[x:=0];if(x>0){l:=x;}else{skip;} while (x < 3) { x := x + 1; }";
        let text = render_program(&parse_program(src).unwrap().cmd, None);
        assert_eq!(
            text,
            "x := h;\n[x := 0];\nif (x > 0) {\n  l := x;\n}\nwhile (x < 3) {\n  x := x + 1;\n}\n"
        );
        assert_eq!(render_program(&parse_program(&text).unwrap().cmd, None), text);
    }

    #[test]
    fn minimal_parentheses() {
        for s in ["(a + b) * c", "a * (b + c)", "a - (b - c)", "a - b - c", "-3 * x", "x - -3", "(a || b) && c"] {
            let e = parse_expr(s).unwrap();
            assert_eq!(e.to_string(), s);
        }
    }

    #[test]
    fn labels_round_trip() {
        let lat = Lattice::two_point();
        for s in ["(x % 2 == 0 ? H : L)", "L \\/ H /\\ L", "(L \\/ H) /\\ L", "(a ? (b ? H : L) : L \\/ H)"] {
            let t = crate::parser::parse_label_expr(s, &lat).unwrap();
            assert_eq!(t.display(&lat).to_string(), s);
        }
    }
}
