//! Concrete syntax for programs, label files and lattice files, plus the
//! pretty-printer.

mod labels;
mod lexer;
pub mod render;

use std::collections::BTreeMap;

pub use labels::{parse_label_expr, parse_labels, parse_lattice, LabelFile, RawLabelFile};
pub use lexer::{lex, Tok, Token};
pub use render::{render_labels, render_program};

use crate::lang::{BinOp, Cmd, Expr, SiteId, Var};
use crate::{Error, Result};

const KEYWORDS: [&str; 5] = ["skip", "if", "else", "while", "init"];

/// A parsed program together with its `init` headers and the source line of
/// every assignment site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceProgram {
    pub cmd: Cmd,
    pub inits: BTreeMap<Var, i64>,
    pub site_lines: BTreeMap<SiteId, usize>,
}

impl SourceProgram {
    pub fn line_of(&self, site: SiteId) -> Option<usize> {
        self.site_lines.get(&site).copied()
    }
}

/// Parses a source program. Identifiers may not contain `@`.
pub fn parse_program(text: &str) -> Result<SourceProgram> {
    Parser::new(text, false)?.program()
}

/// Parses a program that may mention variable copies such as `x@2`
/// (for example the output of `iflow transform`).
pub fn parse_transformed_program(text: &str) -> Result<SourceProgram> {
    Parser::new(text, true)?.program()
}

/// Parses a standalone expression; copies are allowed.
pub fn parse_expr(text: &str) -> Result<Expr> {
    let mut p = Parser::new(text, true)?;
    let e = p.expr()?;
    p.expect(&Tok::Eof)?;
    Ok(e)
}

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    allow_copies: bool,
    next_site: u32,
    site_lines: BTreeMap<SiteId, usize>,
}

impl Parser {
    pub(crate) fn new(text: &str, allow_copies: bool) -> Result<Self> {
        Ok(Parser { toks: lex(text)?, pos: 0, allow_copies, next_site: 0, site_lines: BTreeMap::new() })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    pub(crate) fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    pub(crate) fn mark(&self) -> usize {
        self.pos
    }

    pub(crate) fn reset(&mut self, mark: usize) {
        self.pos = mark;
    }

    pub(crate) fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self.here();
        Error::Syntax { line, col, msg: msg.into() }
    }

    pub(crate) fn unexpected(&self, wanted: &str) -> Error {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    pub(crate) fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, t: &Tok) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            let wanted = match t {
                Tok::Eof => "end of input".to_string(),
                t => t.describe(),
            };
            Err(self.unexpected(&wanted))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    /// A variable name, checked against keywords and the copy-name rules.
    pub(crate) fn var(&mut self) -> Result<Var> {
        let (line, col) = self.here();
        let name = self.ident()?;
        if KEYWORDS.contains(&name.as_str()) {
            return Err(Error::Syntax { line, col, msg: format!("`{name}` is a keyword") });
        }
        let v = Var::new(&name);
        if v.is_copy() {
            if !self.allow_copies {
                return Err(Error::ReservedName { line, col, name });
            }
            if v.split_copy().is_none() || KEYWORDS.contains(&v.split_copy().unwrap().0) {
                return Err(Error::MalformedName(name));
            }
        }
        Ok(v)
    }

    fn program(mut self) -> Result<SourceProgram> {
        let mut inits = BTreeMap::new();
        while self.is_keyword("init") {
            self.bump();
            let (line, col) = self.here();
            let x = self.var()?;
            self.expect(&Tok::Eq)?;
            let neg = self.eat(&Tok::Minus);
            let n = self.int_literal(neg)?;
            self.expect(&Tok::Semi)?;
            if inits.insert(x.clone(), n).is_some() {
                return Err(Error::Syntax { line, col, msg: format!("duplicate init for `{x}`") });
            }
        }
        let cmd = self.stmts(&Tok::Eof)?;
        self.expect(&Tok::Eof)?;
        Ok(SourceProgram { cmd, inits, site_lines: self.site_lines })
    }

    fn int_literal(&mut self, negative: bool) -> Result<i64> {
        match *self.peek() {
            Tok::Int(n) => {
                let v = if negative {
                    0i64.checked_sub_unsigned(n)
                } else {
                    i64::try_from(n).ok()
                };
                let v = v.ok_or_else(|| self.error(format!("integer literal `{n}` out of range")))?;
                self.bump();
                Ok(v)
            }
            _ => Err(self.unexpected("an integer")),
        }
    }

    fn stmts(&mut self, end: &Tok) -> Result<Cmd> {
        let mut cmds = Vec::new();
        while self.peek() != end && self.peek() != &Tok::Eof {
            cmds.push(self.stmt()?);
        }
        Ok(Cmd::seq_all(cmds))
    }

    fn block(&mut self) -> Result<Cmd> {
        self.expect(&Tok::LBrace)?;
        let c = self.stmts(&Tok::RBrace)?;
        self.expect(&Tok::RBrace)?;
        Ok(c)
    }

    fn new_site(&mut self, line: usize) -> SiteId {
        let s = SiteId(self.next_site);
        self.next_site += 1;
        self.site_lines.insert(s, line);
        s
    }

    fn stmt(&mut self) -> Result<Cmd> {
        let (line, _) = self.here();
        if self.is_keyword("skip") {
            self.bump();
            self.expect(&Tok::Semi)?;
            return Ok(Cmd::Skip);
        }
        if self.is_keyword("if") {
            self.bump();
            let guard = self.paren_expr()?;
            let then_branch = self.block()?;
            let else_branch = if self.is_keyword("else") {
                self.bump();
                if self.is_keyword("if") {
                    self.stmt()?
                } else {
                    self.block()?
                }
            } else {
                Cmd::Skip
            };
            return Ok(Cmd::if_(guard, then_branch, else_branch));
        }
        if self.is_keyword("while") {
            self.bump();
            let guard = self.paren_expr()?;
            let body = self.block()?;
            return Ok(Cmd::while_(guard, body));
        }
        if self.eat(&Tok::LBracket) {
            let site = self.new_site(line);
            let target = self.var()?;
            self.expect(&Tok::ColonEq)?;
            let rhs = self.expr()?;
            self.expect(&Tok::RBracket)?;
            self.expect(&Tok::Semi)?;
            return Ok(Cmd::BracketAssign { site, target, rhs });
        }
        if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::ColonEq {
            let site = self.new_site(line);
            let target = self.var()?;
            self.bump();
            let rhs = self.expr()?;
            self.expect(&Tok::Semi)?;
            return Ok(Cmd::Assign { site, target, rhs });
        }
        Err(self.unexpected("a statement"))
    }

    fn paren_expr(&mut self) -> Result<Expr> {
        self.expect(&Tok::LParen)?;
        let e = self.expr()?;
        self.expect(&Tok::RParen)?;
        Ok(e)
    }

    pub(crate) fn expr(&mut self) -> Result<Expr> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Percent => BinOp::Mod,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::AndAnd => BinOp::And,
            Tok::OrOr => BinOp::Or,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr> {
        if min_prec > 5 {
            return self.unary();
        }
        let mut lhs = self.binary(min_prec + 1)?;
        while let Some(op) = self.binop().filter(|op| op.precedence() == min_prec) {
            self.bump();
            let rhs = self.binary(min_prec + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(&Tok::Minus) {
            if matches!(self.peek(), Tok::Int(_)) {
                return Ok(Expr::Int(self.int_literal(true)?));
            }
            let e = self.unary()?;
            return Ok(Expr::bin(BinOp::Sub, Expr::Int(0), e));
        }
        match self.peek() {
            Tok::Int(_) => Ok(Expr::Int(self.int_literal(false)?)),
            Tok::Ident(_) => Ok(Expr::Var(self.var()?)),
            Tok::LParen => self.paren_expr(),
            _ => Err(self.unexpected("an expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Cmd {
        parse_program(s).unwrap().cmd
    }

    #[test]
    fn bracketed_assignment_sequence() {
        let want = Cmd::seq_all([
            Cmd::assign(0, "x", Expr::var("h")),
            Cmd::bracket(1, "x", Expr::Int(0)),
            Cmd::assign(2, "l", Expr::var("x")),
        ]);
        assert_eq!(p("x := h; [x := 0]; l := x;"), want);
    }

    #[test]
    fn skip_and_one_armed_if() {
        assert_eq!(p("skip;"), Cmd::Skip);
        assert_eq!(p(""), Cmd::Skip);
        let want = Cmd::if_(
            Expr::bin(BinOp::Gt, Expr::var("x"), Expr::Int(0)),
            Cmd::assign(0, "y", Expr::Int(1)),
            Cmd::Skip,
        );
        assert_eq!(p("if (x>0) { y := 1; }"), want);
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expr("a || b && c == d + e * f % g").unwrap();
        assert_eq!(e.to_string(), "a || b && c == d + e * f % g");
        let e = parse_expr("a - b - c").unwrap();
        assert_eq!(
            e,
            Expr::bin(BinOp::Sub, Expr::bin(BinOp::Sub, Expr::var("a"), Expr::var("b")), Expr::var("c"))
        );
        let e = parse_expr("a - (b - c)").unwrap();
        assert_eq!(e.to_string(), "a - (b - c)");
        assert_eq!(parse_expr("-x * 2").unwrap().to_string(), "(0 - x) * 2");
        assert_eq!(parse_expr("-3").unwrap(), Expr::Int(-3));
        assert_eq!(parse_expr("-9223372036854775808").unwrap(), Expr::Int(i64::MIN));
        assert!(parse_expr("9223372036854775808").is_err());
    }

    #[test]
    fn sites_follow_text_order() {
        let sp = parse_program("x := 1;\nif (x) {\n  y := 2;\n} else {\n  [z := 3];\n}\nwhile (0) { w := 4; }").unwrap();
        assert_eq!(sp.cmd.sites(), vec![SiteId(0), SiteId(1), SiteId(2), SiteId(3)]);
        assert_eq!(sp.line_of(SiteId(2)), Some(5));
        assert_eq!(sp.line_of(SiteId(3)), Some(7));
    }

    #[test]
    fn init_headers() {
        let sp = parse_program("init x = 0;\ninit y = -4;\nx := y;").unwrap();
        assert_eq!(sp.inits.get(&Var::new("y")), Some(&-4));
        assert_eq!(sp.inits.len(), 2);
    }

    #[test]
    fn reserved_names() {
        let err = parse_program("x@1 := 0;").unwrap_err();
        assert_eq!(err, Error::ReservedName { line: 1, col: 1, name: "x@1".into() });
        assert!(parse_transformed_program("x@1 := 0;").is_ok());
        assert!(matches!(parse_transformed_program("x@ := 0;"), Err(Error::MalformedName(_))));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_program("x := ;").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, col: 6, .. }), "{err:?}");
        let err = parse_program("if (x) {\n y := 1;\n").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 3, .. }), "{err:?}");
        assert!(parse_program("while := 1;").is_err());
    }
}
