#![allow(dead_code)]

use iflow::harness::{GenConfig, GuardStyle, ProgramGen};
use iflow::lang::{BinOp, Cmd, Expr, Label, Lattice, LevelId, Memory, Var};
use proptest::prelude::*;

pub fn two_point() -> (Lattice, LevelId, LevelId) {
    let lat = Lattice::two_point();
    let (l, h) = (lat.level("L").unwrap(), lat.level("H").unwrap());
    (lat, l, h)
}

/// Small lattices: chains, the diamond, M3, N5 and the 2x3 grid.
pub fn small_lattices() -> Vec<Lattice> {
    let mut out = Vec::new();
    let names = ["a", "b", "c", "d", "e", "f"];
    for n in 1..=6 {
        let below: Vec<(&str, &str)> = (1..n).map(|i| (names[i - 1], names[i])).collect();
        out.push(Lattice::new(&names[..n], &below).unwrap());
    }
    let mk = |levels: &[&str], below: &[(&str, &str)]| Lattice::new(levels, below).unwrap();
    out.push(mk(&["bot", "p", "q", "top"], &[("bot", "p"), ("bot", "q"), ("p", "top"), ("q", "top")]));
    out.push(mk(
        &["bot", "p", "q", "r", "top"],
        &[("bot", "p"), ("bot", "q"), ("bot", "r"), ("p", "top"), ("q", "top"), ("r", "top")],
    ));
    out.push(mk(&["bot", "p", "q", "r", "top"], &[("bot", "p"), ("p", "q"), ("q", "top"), ("bot", "r"), ("r", "top")]));
    out.push(mk(
        &["00", "01", "02", "10", "11", "12"],
        &[("00", "01"), ("01", "02"), ("10", "11"), ("11", "12"), ("00", "10"), ("01", "11"), ("02", "12")],
    ));
    out
}

pub fn vars(names: &[&str]) -> Vec<Var> {
    names.iter().map(|n| Var::new(n)).collect()
}

pub fn programs(seed: u64, depth: usize, bracket_prob: f64) -> ProgramGen {
    ProgramGen::new(GenConfig { seed, max_depth: depth, bracket_prob, ..Default::default() })
}

pub fn free_programs(seed: u64, depth: usize) -> ProgramGen {
    ProgramGen::new(GenConfig { seed, max_depth: depth, guard_style: GuardStyle::Free, ..Default::default() })
}

pub fn program_from(seed: u64) -> Cmd {
    programs(seed, 3, 0.4).program()
}

pub fn value() -> impl Strategy<Value = i64> {
    -16i64..=16
}

pub fn memory_over(names: &'static [&'static str]) -> impl Strategy<Value = Memory> {
    proptest::collection::vec(value(), names.len())
        .prop_map(move |vs| names.iter().zip(vs).map(|(n, v)| (Var::new(n), v)).collect())
}

pub fn guard_over(names: &'static [&'static str]) -> impl Strategy<Value = Expr> {
    let var = proptest::sample::select(names).prop_map(Expr::var);
    let op = proptest::sample::select(vec![BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Eq, BinOp::Ne]);
    (var, op, -3i64..=3, any::<bool>()).prop_map(|(v, op, k, parity)| {
        if parity {
            Expr::bin(BinOp::Eq, Expr::bin(BinOp::Mod, v, Expr::Int(2)), Expr::Int(k.rem_euclid(2)))
        } else {
            Expr::bin(op, v, Expr::Int(k))
        }
    })
}

/// Labels over `lat` whose guards read `names`.
pub fn label_over(lat: &Lattice, names: &'static [&'static str]) -> impl Strategy<Value = Label> {
    let levels: Vec<LevelId> = lat.levels().collect();
    let leaf = proptest::sample::select(levels).prop_map(Label::Level);
    leaf.prop_recursive(3, 12, 3, move |inner| {
        prop_oneof![
            (guard_over(names), inner.clone(), inner.clone()).prop_map(|(g, a, b)| Label::cond(g, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Label::join(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Label::meet(a, b)),
        ]
    })
}
