use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};
use thiserror::Error;

use super::Memory;

/// Separator between a base variable name and its copy index (`x@2`).
pub const COPY_SEPARATOR: char = '@';

/// A program variable. Transformed programs use copies named `base@k`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: impl AsRef<str>) -> Self {
        Var(Arc::from(name.as_ref()))
    }

    /// The `k`-th copy of base variable `base`.
    pub fn copy(base: &Var, index: u32) -> Self {
        Var::new(format!("{}{}{}", base.as_str(), COPY_SEPARATOR, index))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_copy(&self) -> bool {
        self.0.contains(COPY_SEPARATOR)
    }

    /// Splits `x@k` into (`x`, `Some(k)`); a plain name yields `None` for the index.
    /// Returns `None` when the name is malformed.
    pub fn split_copy(&self) -> Option<(&str, Option<u32>)> {
        match self.0.split_once(COPY_SEPARATOR) {
            None => (!self.0.is_empty()).then_some((&self.0, None)),
            Some((base, idx)) => {
                if base.is_empty() || idx.is_empty() || !idx.bytes().all(|b| b.is_ascii_digit()) {
                    return None;
                }
                idx.parse().ok().map(|k| (base, Some(k)))
            }
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

impl Serialize for Var {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub const ALL: [BinOp; 12] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Mod,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::And,
        BinOp::Or,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter. All levels are left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Mod => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }

    pub fn apply(self, a: i64, b: i64) -> Result<i64, RuntimeError> {
        let overflow = || RuntimeError::Overflow { op: self, lhs: a, rhs: b };
        Ok(match self {
            BinOp::Add => a.checked_add(b).ok_or_else(overflow)?,
            BinOp::Sub => a.checked_sub(b).ok_or_else(overflow)?,
            BinOp::Mul => a.checked_mul(b).ok_or_else(overflow)?,
            BinOp::Mod => {
                if b == 0 {
                    return Err(RuntimeError::ModByZero { lhs: a });
                }
                a.checked_rem(b).ok_or_else(overflow)?
            }
            BinOp::Eq => (a == b) as i64,
            BinOp::Ne => (a != b) as i64,
            BinOp::Lt => (a < b) as i64,
            BinOp::Le => (a <= b) as i64,
            BinOp::Gt => (a > b) as i64,
            BinOp::Ge => (a >= b) as i64,
            BinOp::And => (a != 0 && b != 0) as i64,
            BinOp::Or => (a != 0 || b != 0) as i64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum RuntimeError {
    #[error("remainder of {lhs} by zero")]
    ModByZero { lhs: i64 },
    #[error("integer overflow in {lhs} {} {rhs}", op.symbol())]
    Overflow { op: BinOp, lhs: i64, rhs: i64 },
    #[error("read of undefined variable `{0}`")]
    Undefined(Var),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Expr {
    Int(i64),
    Var(Var),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl AsRef<str>) -> Self {
        Expr::Var(Var::new(name))
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    /// Big-step evaluation. Comparisons yield 1/0; `&&` and `||` evaluate both
    /// operands and treat any nonzero value as true.
    pub fn eval(&self, m: &Memory) -> Result<i64, RuntimeError> {
        match self {
            Expr::Int(n) => Ok(*n),
            Expr::Var(x) => m.get(x).ok_or_else(|| RuntimeError::Undefined(x.clone())),
            Expr::Bin(op, l, r) => {
                let a = l.eval(m)?;
                let b = r.eval(m)?;
                op.apply(a, b)
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(x) => {
                out.insert(x.clone());
            }
            Expr::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn mentions(&self, x: &Var) -> bool {
        match self {
            Expr::Int(_) => false,
            Expr::Var(y) => y == x,
            Expr::Bin(_, l, r) => l.mentions(x) || r.mentions(x),
        }
    }

    /// Rewrites every variable through `f`; variables mapped to `None` stay put.
    pub fn map_vars(&self, f: &mut impl FnMut(&Var) -> Option<Expr>) -> Expr {
        match self {
            Expr::Int(n) => Expr::Int(*n),
            Expr::Var(x) => f(x).unwrap_or_else(|| Expr::Var(x.clone())),
            Expr::Bin(op, l, r) => Expr::bin(*op, l.map_vars(f), r.map_vars(f)),
        }
    }

    pub fn substitute(&self, subst: &BTreeMap<Var, Expr>) -> Expr {
        self.map_vars(&mut |x| subst.get(x).cloned())
    }

    /// Folds ground subterms. Subterms whose evaluation fails are left as is.
    pub fn fold_constants(&self) -> Expr {
        match self {
            Expr::Bin(op, l, r) => {
                let l = l.fold_constants();
                let r = r.fold_constants();
                if let (Expr::Int(a), Expr::Int(b)) = (&l, &r) {
                    if let Ok(v) = op.apply(*a, *b) {
                        return Expr::Int(v);
                    }
                }
                Expr::bin(*op, l, r)
            }
            other => other.clone(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Expr::Int(_) | Expr::Var(_) => 1,
            Expr::Bin(_, l, r) => 1 + l.size() + r.size(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        crate::parser::render::write_expr(f, self, 0)
    }
}
