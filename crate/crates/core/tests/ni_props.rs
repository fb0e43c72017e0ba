mod common;

use common::*;
use iflow::harness::{erasure_ni_trial, gen_typed_case, ni_test, ni_trials, Agreement, NiConfig};
use iflow::lang::Memory;
use iflow::parser::{parse_labels, parse_program};

#[test]
fn erasure_runs_of_typed_programs_are_noninterfering() {
    let (lat, ..) = two_point();
    let mut gen = programs(31, 3, 0.4);
    let (mut agree, mut programs_seen) = (0, 0);
    for p in 0..120u64 {
        let Some(tc) = gen_typed_case(&mut gen, &lat, true, 300) else { continue };
        programs_seen += 1;
        for i in 0..20 {
            match erasure_ni_trial(&tc.report, &lat, p, i, 5000) {
                Agreement::Disagree { detail } => panic!("{detail}\n{}", tc.report.transformed),
                Agreement::Agree => agree += 1,
                Agreement::Discarded => {}
            }
        }
    }
    assert!(programs_seen > 100 && agree > 1000, "{programs_seen} programs, {agree} agreeing pairs");
}

#[test]
fn typed_random_programs_pass_trials() {
    let (lat, ..) = two_point();
    let mut gen = programs(47, 3, 0.4);
    for seed in 0..30 {
        let tc = gen_typed_case(&mut gen, &lat, true, 300).unwrap();
        let r = ni_trials(&tc.source, &tc.report, &lat, Memory::new(), &NiConfig { trials: 300, seed, ..Default::default() });
        assert_eq!(r.failed, 0, "{:?}\n{}", r.counterexample, tc.report.transformed);
        assert_eq!(r.passed + r.failed + r.discarded, r.attempted);
    }
}

#[test]
fn trials_are_reproducible_and_find_explicit_leaks() {
    let (lat, ..) = two_point();
    let p = parse_program("l := h + 1;").unwrap();
    let labels = parse_labels("label h : H; label l : L;", &lat).unwrap();
    let cfg = NiConfig { trials: 200, seed: 9, force: true, ..Default::default() };
    let a = ni_test(&p, &labels, &lat, &cfg).unwrap();
    let b = ni_test(&p, &labels, &lat, &cfg).unwrap();
    assert!(!a.accepted && a.failed > 0);
    assert_eq!(a.counterexample, b.counterexample);
    assert_eq!((a.passed, a.failed, a.discarded), (b.passed, b.failed, b.discarded));
    assert!(ni_test(&p, &labels, &lat, &NiConfig { force: false, ..cfg }).is_err());
}
