use std::collections::BTreeMap;

use super::{Parser, Tok};
use crate::lang::{Expr, Label, Lattice, TypingEnv, Var};
use crate::{Error, Result};

/// A label as written, before level names are resolved in a lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
enum RawLabel {
    Level { name: String, line: usize, col: usize },
    Cond(Expr, Box<RawLabel>, Box<RawLabel>),
    Join(Box<RawLabel>, Box<RawLabel>),
    Meet(Box<RawLabel>, Box<RawLabel>),
}

impl RawLabel {
    fn resolve(&self, lat: &Lattice) -> Result<Label> {
        Ok(match self {
            RawLabel::Level { name, line, col } => Label::Level(lat.level(name).map_err(|_| Error::Syntax {
                line: *line,
                col: *col,
                msg: format!("unknown security level `{name}`"),
            })?),
            RawLabel::Cond(g, t, e) => Label::cond(g.clone(), t.resolve(lat)?, e.resolve(lat)?),
            RawLabel::Join(a, b) => Label::join(a.resolve(lat)?, b.resolve(lat)?),
            RawLabel::Meet(a, b) => Label::meet(a.resolve(lat)?, b.resolve(lat)?),
        })
    }
}

/// A label file whose level names have not yet been checked. Needed because
/// the file may itself name the lattice to use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawLabelFile {
    pub lattice: Option<String>,
    entries: Vec<(Var, RawLabel)>,
    default: Option<RawLabel>,
}

impl RawLabelFile {
    pub fn parse(text: &str) -> Result<RawLabelFile> {
        let mut p = Parser::new(text, true)?;
        let mut out = RawLabelFile { lattice: None, entries: Vec::new(), default: None };
        let mut seen = BTreeMap::new();
        while p.peek() != &Tok::Eof {
            let (line, col) = p.here();
            let kw = p.ident()?;
            match kw.as_str() {
                "lattice" => {
                    let Tok::Str(path) = p.bump() else {
                        return Err(Error::Syntax { line, col, msg: "expected a quoted lattice path".into() });
                    };
                    if out.lattice.replace(path).is_some() {
                        return Err(Error::Syntax { line, col, msg: "duplicate lattice directive".into() });
                    }
                }
                "label" => {
                    let x = p.var()?;
                    p.expect(&Tok::Colon)?;
                    let t = label(&mut p)?;
                    if seen.insert(x.clone(), ()).is_some() {
                        return Err(Error::Syntax { line, col, msg: format!("duplicate label for `{x}`") });
                    }
                    out.entries.push((x, t));
                }
                "default" => {
                    p.expect(&Tok::Colon)?;
                    let t = label(&mut p)?;
                    if out.default.replace(t).is_some() {
                        return Err(Error::Syntax { line, col, msg: "duplicate default rule".into() });
                    }
                }
                other => {
                    return Err(Error::Syntax {
                        line,
                        col,
                        msg: format!("expected `label`, `default` or `lattice`, found `{other}`"),
                    })
                }
            }
            p.expect(&Tok::Semi)?;
        }
        Ok(out)
    }

    pub fn resolve(&self, lat: &Lattice) -> Result<LabelFile> {
        let mut rules = BTreeMap::new();
        for (x, t) in &self.entries {
            rules.insert(x.clone(), t.resolve(lat)?);
        }
        let default = self.default.as_ref().map(|t| t.resolve(lat)).transpose()?;
        Ok(LabelFile { lattice: self.lattice.clone(), rules, default })
    }
}

/// Label annotations. Rules may name a base variable or one specific copy.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelFile {
    pub lattice: Option<String>,
    pub rules: BTreeMap<Var, Label>,
    pub default: Option<Label>,
}

impl LabelFile {
    /// Label for `v`: a rule for `v` itself, else a rule for its base name,
    /// else the default.
    pub fn lookup(&self, v: &Var) -> Option<&Label> {
        if let Some(t) = self.rules.get(v) {
            return Some(t);
        }
        if let Some((base, Some(_))) = v.split_copy() {
            if let Some(t) = self.rules.get(&Var::new(base)) {
                return Some(t);
            }
        }
        self.default.as_ref()
    }

    /// Environment over exactly `vars`, plus any variables the chosen labels
    /// mention. Fails when some variable has no rule and there is no default.
    pub fn env_for<'a>(&self, vars: impl IntoIterator<Item = &'a Var>) -> Result<TypingEnv> {
        let mut env = TypingEnv::new();
        let mut todo: Vec<Var> = vars.into_iter().cloned().collect();
        while let Some(v) = todo.pop() {
            if env.contains(&v) {
                continue;
            }
            let t = self.lookup(&v).ok_or_else(|| Error::MissingLabel(v.clone()))?.clone();
            todo.extend(t.free_vars());
            env.insert(v, t);
        }
        Ok(env)
    }

    /// Rules only, as an environment (default kept as the fallback).
    pub fn to_env(&self) -> TypingEnv {
        let mut env: TypingEnv = self.rules.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        env.set_default(self.default.clone());
        env
    }

    pub fn from_env(env: &TypingEnv) -> LabelFile {
        LabelFile {
            lattice: None,
            rules: env.entries().map(|(k, v)| (k.clone(), v.clone())).collect(),
            default: env.default_label().cloned(),
        }
    }

    pub fn is_levels_only(&self) -> bool {
        self.rules.values().chain(&self.default).all(Label::is_level)
    }
}

/// Parses a label file whose levels must all exist in `lat`. A `lattice`
/// directive is recorded but not followed.
pub fn parse_labels(text: &str, lat: &Lattice) -> Result<LabelFile> {
    RawLabelFile::parse(text)?.resolve(lat)
}

/// Parses a single label such as `(x > 0 ? H : L) \/ M`.
pub fn parse_label_expr(text: &str, lat: &Lattice) -> Result<Label> {
    let mut p = Parser::new(text, true)?;
    let t = label(&mut p)?;
    p.expect(&Tok::Eof)?;
    t.resolve(lat)
}

fn label(p: &mut Parser) -> Result<RawLabel> {
    let mut t = meet_term(p)?;
    while p.eat(&Tok::JoinOp) {
        t = RawLabel::Join(Box::new(t), Box::new(meet_term(p)?));
    }
    Ok(t)
}

fn meet_term(p: &mut Parser) -> Result<RawLabel> {
    let mut t = label_atom(p)?;
    while p.eat(&Tok::MeetOp) {
        t = RawLabel::Meet(Box::new(t), Box::new(label_atom(p)?));
    }
    Ok(t)
}

fn label_atom(p: &mut Parser) -> Result<RawLabel> {
    let (line, col) = p.here();
    if p.eat(&Tok::LParen) {
        // Either `(guard ? t : t)` or a parenthesized label.
        let mark = p.mark();
        if let Ok(guard) = p.expr() {
            if p.eat(&Tok::Question) {
                let t = label(p)?;
                p.expect(&Tok::Colon)?;
                let e = label(p)?;
                p.expect(&Tok::RParen)?;
                return Ok(RawLabel::Cond(guard, Box::new(t), Box::new(e)));
            }
        }
        p.reset(mark);
        let t = label(p)?;
        p.expect(&Tok::RParen)?;
        return Ok(t);
    }
    match p.peek().clone() {
        Tok::Ident(name) => {
            p.bump();
            Ok(RawLabel::Level { name, line, col })
        }
        _ => Err(p.unexpected("a security label")),
    }
}

/// Parses `levels: a b c; order: a < b; b < c;`.
pub fn parse_lattice(text: &str) -> Result<Lattice> {
    let mut p = Parser::new(text, false)?;
    let mut levels: Option<Vec<String>> = None;
    let mut order = Vec::new();
    while p.peek() != &Tok::Eof {
        let (line, col) = p.here();
        let kw = p.ident()?;
        p.expect(&Tok::Colon)?;
        match kw.as_str() {
            "levels" => {
                let mut names = Vec::new();
                while let Tok::Ident(n) = p.peek().clone() {
                    p.bump();
                    names.push(n);
                }
                p.expect(&Tok::Semi)?;
                if levels.replace(names).is_some() {
                    return Err(Error::Syntax { line, col, msg: "duplicate `levels` section".into() });
                }
            }
            "order" => loop {
                if p.peek() == &Tok::Eof || is_section(&p) {
                    break;
                }
                if p.eat(&Tok::Semi) || p.eat(&Tok::Comma) {
                    continue;
                }
                // `a < b < c` is shorthand for `a < b; b < c`.
                let mut lo = p.ident()?;
                p.expect(&Tok::Lt)?;
                loop {
                    let hi = p.ident()?;
                    order.push((lo, hi.clone()));
                    lo = hi;
                    if !p.eat(&Tok::Lt) {
                        break;
                    }
                }
                if !p.eat(&Tok::Semi) && !p.eat(&Tok::Comma) && p.peek() != &Tok::Eof {
                    return Err(p.unexpected("`;`"));
                }
            },
            other => {
                return Err(Error::Syntax {
                    line,
                    col,
                    msg: format!("expected `levels` or `order`, found `{other}`"),
                })
            }
        }
    }
    let levels = levels.ok_or_else(|| Error::Lattice("missing `levels` section".into()))?;
    Lattice::new(&levels, &order)
}

fn is_section(p: &Parser) -> bool {
    matches!(p.peek(), Tok::Ident(s) if s == "levels" || s == "order") && p.peek_at(1) == &Tok::Colon
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::BinOp;

    fn two() -> Lattice {
        Lattice::two_point()
    }

    fn lv(s: &str) -> Label {
        Label::Level(two().level(s).unwrap())
    }

    #[test]
    fn dependent_rule() {
        let f = parse_labels("label y : (l1 < 0 ? H : L);", &two()).unwrap();
        let want = Label::cond(Expr::bin(BinOp::Lt, Expr::var("l1"), Expr::Int(0)), lv("H"), lv("L"));
        assert_eq!(f.rules.get(&Var::new("y")), Some(&want));
    }

    #[test]
    fn default_rule() {
        let f = parse_labels("default : L;", &two()).unwrap();
        assert_eq!(f.lookup(&Var::new("anything")), Some(&lv("L")));
        assert_eq!(parse_labels("", &two()).unwrap().lookup(&Var::new("q")), None);
    }

    #[test]
    fn copy_rules_override_base_rules() {
        let f = parse_labels("label x@1 : L; label x : H;", &two()).unwrap();
        assert_eq!(f.lookup(&Var::new("x@1")), Some(&lv("L")));
        assert_eq!(f.lookup(&Var::new("x")), Some(&lv("H")));
        assert_eq!(f.lookup(&Var::new("x@2")), Some(&lv("H")));
        assert_eq!(f.lookup(&Var::new("y")), None);
    }

    #[test]
    fn label_operators_and_parentheses() {
        let lat = two();
        let t = parse_label_expr("L \\/ H /\\ L", &lat).unwrap();
        assert_eq!(t, Label::join(lv("L"), Label::meet(lv("H"), lv("L"))));
        let t = parse_label_expr("(L \\/ H) /\\ L", &lat).unwrap();
        assert_eq!(t, Label::meet(Label::join(lv("L"), lv("H")), lv("L")));
        let t = parse_label_expr("(x ? (y == 1 ? H : L) : L)", &lat).unwrap();
        assert_eq!(t.free_vars().len(), 2);
        assert!(parse_label_expr("M", &lat).is_err());
        assert!(parse_label_expr("(x > ? H : L)", &lat).is_err());
    }

    #[test]
    fn lattice_directive_and_errors() {
        let raw = RawLabelFile::parse("lattice \"diamond.lat\";\nlabel a : A;").unwrap();
        assert_eq!(raw.lattice.as_deref(), Some("diamond.lat"));
        assert!(raw.resolve(&two()).is_err());
        assert!(parse_labels("label x : H; label x : L;", &two()).is_err());
        assert!(parse_labels("label x : H", &two()).is_err());
    }

    #[test]
    fn env_for_pulls_in_guard_variables() {
        let f = parse_labels("label y : (x > 0 ? H : L); label x : L;", &two()).unwrap();
        let env = f.env_for([&Var::new("y")]).unwrap();
        assert!(env.contains(&Var::new("x")));
        let f = parse_labels("label y : H;", &two()).unwrap();
        assert_eq!(f.env_for([&Var::new("z")]), Err(Error::MissingLabel(Var::new("z"))));
    }

    #[test]
    fn lattice_files() {
        let lat = parse_lattice("levels: L H; order: L < H;").unwrap();
        assert!(lat.leq(lat.level("L").unwrap(), lat.level("H").unwrap()));
        let one = parse_lattice("levels: A;").unwrap();
        assert_eq!(one.bottom(), one.top());
        let err = parse_lattice("levels: A B; order: ;").unwrap_err();
        assert!(matches!(&err, Error::Lattice(m) if m.contains("`A` and `B` have no join")), "{err}");
        let d = parse_lattice("# diamond\nlevels: bot a b top;\norder: bot < a < top; bot < b < top;").unwrap();
        assert_eq!(d.join(d.level("a").unwrap(), d.level("b").unwrap()), d.level("top").unwrap());
    }
}
