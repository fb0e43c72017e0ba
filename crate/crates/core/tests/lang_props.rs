mod common;

use common::*;
use iflow::lang::{env_wellformed, low_equiv, Label, Lattice, LevelId, Memory, TypingEnv, Var, WfViolation};
use proptest::prelude::*;

#[test]
fn lattice_laws_hold_exhaustively() {
    for lat in small_lattices() {
        let ls: Vec<LevelId> = lat.levels().collect();
        for &a in &ls {
            assert_eq!(lat.join(a, a), a);
            assert_eq!(lat.meet(a, a), a);
            assert!(lat.leq(lat.bottom(), a) && lat.leq(a, lat.top()));
            for &b in &ls {
                assert_eq!(lat.join(a, b), lat.join(b, a));
                assert_eq!(lat.meet(a, b), lat.meet(b, a));
                assert_eq!(lat.leq(a, b), lat.join(a, b) == b, "{lat}: {a:?} {b:?}");
                assert_eq!(lat.leq(a, b), lat.meet(a, b) == a);
                assert_eq!(lat.join(a, lat.meet(a, b)), a);
                for &c in &ls {
                    assert_eq!(lat.join(lat.join(a, b), c), lat.join(a, lat.join(b, c)));
                    assert_eq!(lat.meet(lat.meet(a, b), c), lat.meet(a, lat.meet(b, c)));
                    // The join is the least upper bound.
                    if lat.leq(a, c) && lat.leq(b, c) {
                        assert!(lat.leq(lat.join(a, b), c));
                    }
                    if lat.leq(c, a) && lat.leq(c, b) {
                        assert!(lat.leq(c, lat.meet(a, b)));
                    }
                }
            }
        }
    }
}

const NAMES: &[&str] = &["x", "y", "z", "w"];

fn grid() -> Lattice {
    small_lattices().pop().unwrap()
}

proptest! {
    #[test]
    fn label_join_and_meet_evaluate_pointwise(
        t1 in label_over(&grid(), NAMES),
        t2 in label_over(&grid(), NAMES),
        m in memory_over(NAMES),
    ) {
        let lat = grid();
        let (a, b) = (t1.eval(&m, &lat).unwrap(), t2.eval(&m, &lat).unwrap());
        prop_assert_eq!(Label::join(t1.clone(), t2.clone()).eval(&m, &lat).unwrap(), lat.join(a, b));
        prop_assert_eq!(Label::meet(t1.clone(), t2.clone()).eval(&m, &lat).unwrap(), lat.meet(a, b));
        prop_assert_eq!(t1.simplify(&lat).eval(&m, &lat).unwrap(), a);
    }

    #[test]
    fn low_equivalence_is_an_equivalence(
        ty in label_over(&Lattice::two_point(), &["x", "z"]),
        tw in label_over(&Lattice::two_point(), &["x", "z"]),
        m1 in memory_over(NAMES),
        m2 in memory_over(NAMES),
        m3 in memory_over(NAMES),
        obs_top in any::<bool>(),
    ) {
        let (lat, l, h) = two_point();
        let obs = if obs_top { h } else { l };
        let g: TypingEnv = [
            (Var::new("x"), Label::Level(l)),
            (Var::new("z"), Label::Level(l)),
            (Var::new("y"), ty),
            (Var::new("w"), tw),
        ].into_iter().collect();
        prop_assert!(low_equiv(&m1, &m1, &g, obs, &lat).unwrap());
        prop_assert_eq!(low_equiv(&m1, &m2, &g, obs, &lat).unwrap(), low_equiv(&m2, &m1, &g, obs, &lat).unwrap());
        // Make triples likely to be related by copying the low parts.
        let mut m2 = m2;
        let mut m3 = m3;
        for v in ["x", "z"] {
            let v = Var::new(v);
            m2.set(v.clone(), m1.get(&v).unwrap());
            m3.set(v.clone(), m1.get(&v).unwrap());
        }
        if low_equiv(&m1, &m2, &g, obs, &lat).unwrap() && low_equiv(&m2, &m3, &g, obs, &lat).unwrap() {
            prop_assert!(low_equiv(&m1, &m3, &g, obs, &lat).unwrap());
        }
    }

    #[test]
    fn self_dependent_labels_are_ill_formed(t in label_over(&Lattice::two_point(), &["x"]), k in -3i64..3) {
        let (lat, l, h) = two_point();
        let guard = iflow::parser::parse_expr(&format!("x < {k}")).unwrap();
        let tx = Label::join(Label::cond(guard, Label::Level(h), Label::Level(l)), t);
        let g: TypingEnv = [(Var::new("x"), tx)].into_iter().collect();
        let errs = env_wellformed(&g, &lat).unwrap_err();
        let want = WfViolation::SelfDependence { var: Var::new("x") };
        prop_assert!(errs.contains(&want));
    }
}

#[test]
fn empty_memory_is_equivalent_to_itself() {
    let (lat, l, _) = two_point();
    assert!(low_equiv(&Memory::new(), &Memory::new(), &TypingEnv::new(), l, &lat).unwrap());
}
