mod common;

use common::*;
use iflow::lang::{Cmd, Label, Lattice};
use iflow::parser::{parse_labels, parse_program, parse_transformed_program, render_labels, render_program, LabelFile};
use iflow::transform::transform_program;
use proptest::prelude::*;

fn targets(c: &Cmd) -> Vec<String> {
    c.assignments().iter().map(|a| format!("{}:{}", a.site.0, a.target)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn programs_round_trip(seed in any::<u64>(), depth in 0usize..5, free in any::<bool>()) {
        let c = if free { free_programs(seed, depth).program() } else { programs(seed, depth, 0.4).program() };
        let text = render_program(&c, None);
        let back = parse_program(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back.cmd, &c, "{}", text);
        prop_assert_eq!(targets(&back.cmd), targets(&c));
    }

    #[test]
    fn transformed_programs_round_trip(seed in any::<u64>()) {
        let t = transform_program(&program_from(seed)).unwrap();
        let text = render_program(&t.cmd, Some(&t.active));
        let back = parse_transformed_program(&text).unwrap();
        // Set-assignment sites are renumbered in text order on reparse.
        prop_assert_eq!(back.cmd, t.cmd.renumber_sites());
    }

    #[test]
    fn labels_round_trip(
        tx in label_over(&Lattice::two_point(), &["a", "b"]),
        ty in label_over(&Lattice::two_point(), &["a", "b"]),
        dflt in proptest::option::of(label_over(&Lattice::two_point(), &["a"])),
    ) {
        let lat = Lattice::two_point();
        let mut f = LabelFile::default();
        f.rules.insert("x".into(), tx);
        f.rules.insert("y@2".into(), ty);
        f.default = dflt;
        let text = render_labels(&f, &lat);
        let back = parse_labels(&text, &lat).unwrap();
        prop_assert_eq!(back.rules, f.rules);
        prop_assert_eq!(back.default, f.default);
    }
}

#[test]
fn sites_follow_the_text_after_reformatting() {
    let src = "x := 1; if (x) { [y := 2]; } else { z := 3; }\nwhile (x < 3) { x := x + 1; }";
    let p = parse_program(src).unwrap();
    let again = parse_program(&render_program(&p.cmd, None)).unwrap();
    assert_eq!(targets(&p.cmd), vec!["0:x", "1:y", "2:z", "3:x"]);
    assert_eq!(targets(&again.cmd), targets(&p.cmd));
}

#[test]
fn label_levels_round_trip() {
    let lat = Lattice::two_point();
    let f = parse_labels("label x : L \\/ H; default : L;", &lat).unwrap();
    assert!(matches!(f.rules[&"x".into()], Label::Join(..)));
    assert_eq!(parse_labels(&render_labels(&f, &lat), &lat).unwrap().rules, f.rules);
}
