//! Integer-tightened Fourier–Motzkin elimination over linear constraints.
//!
//! Only refutations are trusted: every derived constraint is an integer
//! consequence of the input, so reaching `0 < c ≤ 0` proves there is no
//! integer solution. Surviving elimination proves nothing.

use std::collections::{BTreeMap, BTreeSet};

use crate::lang::{BinOp, Expr};

/// `Σ coef·atom + constant`. Atoms are variables or opaque nonlinear terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Linear {
    pub coefs: BTreeMap<Expr, i128>,
    pub constant: i128,
}

impl Linear {
    pub fn constant(c: i128) -> Self {
        Linear { coefs: BTreeMap::new(), constant: c }
    }

    pub fn atom(e: Expr) -> Self {
        Linear { coefs: [(e, 1)].into(), constant: 0 }
    }

    fn scale(&self, k: i128) -> Option<Linear> {
        let mut coefs = BTreeMap::new();
        for (a, c) in &self.coefs {
            let v = c.checked_mul(k)?;
            if v != 0 {
                coefs.insert(a.clone(), v);
            }
        }
        Some(Linear { coefs, constant: self.constant.checked_mul(k)? })
    }

    fn add(&self, other: &Linear) -> Option<Linear> {
        let mut coefs = self.coefs.clone();
        for (a, c) in &other.coefs {
            let e = coefs.entry(a.clone()).or_insert(0);
            *e = e.checked_add(*c)?;
            if *e == 0 {
                coefs.remove(a);
            }
        }
        Some(Linear { coefs, constant: self.constant.checked_add(other.constant)? })
    }

    fn sub(&self, other: &Linear) -> Option<Linear> {
        self.add(&other.scale(-1)?)
    }

    pub fn is_constant(&self) -> bool {
        self.coefs.is_empty()
    }
}

/// Linear view of `e`. Products of two non-constants, remainders and
/// boolean-valued subterms become opaque atoms. Returns `None` only on
/// coefficient overflow.
pub fn linearize(e: &Expr) -> Option<Linear> {
    match e {
        Expr::Int(n) => Some(Linear::constant(*n as i128)),
        Expr::Var(_) => Some(Linear::atom(e.clone())),
        Expr::Bin(BinOp::Add, a, b) => linearize(a)?.add(&linearize(b)?),
        Expr::Bin(BinOp::Sub, a, b) => linearize(a)?.sub(&linearize(b)?),
        Expr::Bin(BinOp::Mul, a, b) => {
            let (la, lb) = (linearize(a)?, linearize(b)?);
            if la.is_constant() {
                lb.scale(la.constant)
            } else if lb.is_constant() {
                la.scale(lb.constant)
            } else {
                Some(Linear::atom(e.clone()))
            }
        }
        Expr::Bin(..) => Some(Linear::atom(e.clone())),
    }
}

/// Known bounds on an opaque atom, as constraints `≤ 0`.
fn atom_bounds(atom: &Expr) -> Vec<Linear> {
    let between = |lo: i128, hi: i128| {
        let a = Linear::atom(atom.clone());
        vec![
            Linear { coefs: a.coefs.clone(), constant: -hi },
            Linear { coefs: a.coefs.iter().map(|(k, v)| (k.clone(), -v)).collect(), constant: lo },
        ]
    };
    match atom {
        Expr::Bin(op, ..) if op.is_comparison() || matches!(op, BinOp::And | BinOp::Or) => between(0, 1),
        Expr::Bin(BinOp::Mod, _, m) => match **m {
            Expr::Int(k) if k != 0 => {
                let r = (k as i128).abs() - 1;
                between(-r, r)
            }
            _ => Vec::new(),
        },
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraint {
    /// `lin ≤ 0`
    Le(Linear),
    /// `lin = 0`
    Eq(Linear),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    /// No integer solution exists.
    Infeasible,
    /// Elimination finished without a contradiction.
    Unrefuted,
    /// Gave up (constraint blowup or coefficient overflow).
    Unknown,
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn div_ceil(a: i128, b: i128) -> i128 {
    let q = a.div_euclid(b);
    if a.rem_euclid(b) == 0 {
        q
    } else {
        q + 1
    }
}

/// Divides `lin ≤ 0` by the gcd of its coefficients, rounding the constant
/// up. Sound over the integers.
fn tighten(lin: Linear) -> Linear {
    let g = lin.coefs.values().fold(0, |g, c| gcd(g, *c));
    if g <= 1 {
        return lin;
    }
    Linear { coefs: lin.coefs.into_iter().map(|(a, c)| (a, c / g)).collect(), constant: div_ceil(lin.constant, g) }
}

/// Decides whether `constraints` has an integer solution, as far as
/// elimination can tell. `cap` bounds the working set size.
pub fn feasible(constraints: &[Constraint], cap: usize) -> Feasibility {
    let mut rows: BTreeSet<Linear> = BTreeSet::new();
    let mut atoms = BTreeSet::new();
    for c in constraints {
        let lin = match c {
            Constraint::Le(l) | Constraint::Eq(l) => l,
        };
        atoms.extend(lin.coefs.keys().cloned());
        match c {
            Constraint::Le(l) => {
                rows.insert(tighten(l.clone()));
            }
            Constraint::Eq(l) => {
                let g = l.coefs.values().fold(0, |g, c| gcd(g, *c));
                if g == 0 {
                    if l.constant != 0 {
                        return Feasibility::Infeasible;
                    }
                    continue;
                }
                if l.constant % g != 0 {
                    return Feasibility::Infeasible;
                }
                let Some(neg) = l.scale(-1) else { return Feasibility::Unknown };
                rows.insert(tighten(l.clone()));
                rows.insert(tighten(neg));
            }
        }
    }
    for a in &atoms {
        for b in atom_bounds(a) {
            rows.insert(b);
        }
    }

    loop {
        // Ground rows are checked and dropped.
        let mut next = BTreeSet::new();
        for r in rows {
            if r.is_constant() {
                if r.constant > 0 {
                    return Feasibility::Infeasible;
                }
            } else {
                next.insert(r);
            }
        }
        rows = next;
        if rows.is_empty() {
            return Feasibility::Unrefuted;
        }
        if rows.len() > cap {
            return Feasibility::Unknown;
        }

        // Eliminate the atom producing the fewest new rows.
        let mut counts: BTreeMap<&Expr, (usize, usize)> = BTreeMap::new();
        for r in &rows {
            for (a, c) in &r.coefs {
                let e = counts.entry(a).or_default();
                if *c > 0 {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        let pick = counts
            .iter()
            .min_by_key(|(_, (p, n))| p * n)
            .map(|(a, _)| (*a).clone())
            .expect("non-ground rows mention some atom");

        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), BTreeSet::new());
        for r in rows {
            match r.coefs.get(&pick).copied() {
                Some(c) if c > 0 => pos.push((c, r)),
                Some(c) => neg.push((c, r)),
                None => {
                    rest.insert(r);
                }
            }
        }
        for (cp, p) in &pos {
            for (cn, n) in &neg {
                let combined = p.scale(-cn).and_then(|a| n.scale(*cp).and_then(|b| a.add(&b)));
                let Some(mut combined) = combined else { return Feasibility::Unknown };
                combined.coefs.remove(&pick);
                rest.insert(tighten(combined));
                if rest.len() > cap {
                    return Feasibility::Unknown;
                }
            }
        }
        rows = rest;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_expr;

    fn lin(s: &str) -> Linear {
        linearize(&parse_expr(s).unwrap()).unwrap()
    }

    fn le(a: &str, b: &str) -> Constraint {
        Constraint::Le(lin(a).sub(&lin(b)).unwrap())
    }

    fn eq(a: &str, b: &str) -> Constraint {
        Constraint::Eq(lin(a).sub(&lin(b)).unwrap())
    }

    #[test]
    fn linear_views() {
        let l = lin("2 * x + 3 - (y - x) * 4");
        assert_eq!(l.constant, 3);
        assert_eq!(l.coefs.get(&Expr::var("x")), Some(&6));
        assert_eq!(l.coefs.get(&Expr::var("y")), Some(&-4));
        assert_eq!(lin("x * y").coefs.len(), 1);
    }

    #[test]
    fn negation_copy_contradiction() {
        // x1 = -x, x1 >= 1, x >= 1 has no solution.
        let cs = [eq("x1", "0 - x"), le("1", "x1"), le("1", "x")];
        assert_eq!(feasible(&cs, 100), Feasibility::Infeasible);
        let cs = [eq("x1", "0 - x"), le("1", "x1"), le("x", "0")];
        assert_eq!(feasible(&cs, 100), Feasibility::Unrefuted);
    }

    #[test]
    fn integer_tightening() {
        // 2x = 1 has a rational but no integer solution.
        assert_eq!(feasible(&[eq("2 * x", "1")], 100), Feasibility::Infeasible);
        // 1 <= 2x <= 1 likewise, caught by rounding.
        assert_eq!(feasible(&[le("1", "2 * x"), le("2 * x", "1")], 100), Feasibility::Infeasible);
        assert_eq!(feasible(&[le("0", "2 * x"), le("2 * x", "1")], 100), Feasibility::Unrefuted);
    }

    #[test]
    fn opaque_atoms_carry_bounds() {
        assert_eq!(feasible(&[le("2", "x % 2")], 100), Feasibility::Infeasible);
        assert_eq!(feasible(&[le("1", "x % 2")], 100), Feasibility::Unrefuted);
        assert_eq!(feasible(&[le("2", "(x < y) + 0")], 100), Feasibility::Infeasible);
    }

    #[test]
    fn chains_and_caps() {
        let cs = [le("a", "b"), le("b", "c"), le("c", "d"), le("d + 1", "a")];
        assert_eq!(feasible(&cs, 100), Feasibility::Infeasible);
        assert_eq!(feasible(&[], 100), Feasibility::Unrefuted);
        assert_eq!(feasible(&[eq("0", "1")], 100), Feasibility::Infeasible);
    }
}
