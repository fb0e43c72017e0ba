//! The bundled example corpus and its conformance run.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::harness::{ni_trials, NiConfig};
use crate::hs::{construct_env, verify_construction, HsEnv};
use crate::lang::{Label, Lattice, Memory};
use crate::parser::{parse_labels, parse_program, parse_transformed_program, LabelFile, SourceProgram};
use crate::transform::{bracket_all, transform_program, ActiveSet};
use crate::typecheck::{check_program, CheckOptions, CheckReport};
use crate::{Error, Result};

macro_rules! bundle {
    ($($f:literal),* $(,)?) => {
        &[$(($f, include_str!(concat!("../../../corpus/", $f)))),*]
    };
}

static FILES: &[(&str, &str)] = bundle!(
    "manifest.toml",
    "fig1a.while",
    "fig1a.labels",
    "fig1a_nobracket.while",
    "fig1a_nobracket.labels",
    "fig1b.while",
    "fig1c.while",
    "fig1c.labels",
    "fig5a.while",
    "fig5a.labels",
    "fig5b.while",
    "fig5b.labels",
    "fig6a.while",
    "fig6a.labels",
    "fig6b.while",
    "fig6b.labels",
    "negate.while",
    "negate.labels",
    "negate_nobracket.while",
    "negate_nobracket.labels",
    "fig14.while",
    "fig14.labels",
);

/// Contents of a bundled file.
pub fn file(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

fn require(name: &str) -> Result<&'static str> {
    file(name).ok_or_else(|| Error::Config(format!("corpus has no file `{name}`")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn of(accepted: bool) -> Verdict {
        if accepted {
            Verdict::Accept
        } else {
            Verdict::Reject
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Entry {
    pub name: String,
    pub program: String,
    pub labels: String,
    pub expect: Verdict,
    #[serde(default)]
    pub leaks: bool,
    /// A side-condition failure must be reported on this line.
    pub side_condition_line: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Golden {
    pub name: String,
    pub source: String,
    pub transformed: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Manifest {
    pub entry: Vec<Entry>,
    #[serde(default)]
    pub golden: Vec<Golden>,
}

pub fn manifest() -> Result<Manifest> {
    toml::from_str(require("manifest.toml")?).map_err(|e| Error::Config(format!("corpus manifest: {e}")))
}

pub fn lattice() -> Lattice {
    Lattice::two_point()
}

/// A parsed corpus entry.
pub struct Case {
    pub entry: Entry,
    pub source: SourceProgram,
    pub labels: LabelFile,
}

impl Case {
    pub fn load(entry: &Entry, lat: &Lattice) -> Result<Case> {
        Ok(Case {
            entry: entry.clone(),
            source: parse_program(require(&entry.program)?)?,
            labels: parse_labels(require(&entry.labels)?, lat)?,
        })
    }

    pub fn check(&self, lat: &Lattice) -> Result<CheckReport> {
        let mut r = check_program(&self.source.cmd, &self.labels, lat, &CheckOptions::default())?;
        r.annotate_lines(&self.source.site_lines);
        Ok(r)
    }

    /// Memory fixed by the program's initializers.
    pub fn fixed(&self) -> Memory {
        self.source.inits.iter().map(|(v, n)| (v.clone(), *n)).collect()
    }

    /// Source-variable levels, when every source variable has a bare level.
    pub fn hs_env(&self) -> Option<HsEnv> {
        let mut g = HsEnv::new();
        for v in self.source.cmd.vars() {
            match self.labels.lookup(&v) {
                Some(Label::Level(l)) => {
                    g.insert(v, *l);
                }
                _ => return None,
            }
        }
        Some(g)
    }
}

pub fn cases(lat: &Lattice) -> Result<Vec<Case>> {
    manifest()?.entry.iter().map(|e| Case::load(e, lat)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub name: String,
    pub check: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
    pub millis: f64,
}

impl Row {
    fn new(name: &str, check: &str, expected: String, actual: String, pass: bool, t: Duration) -> Row {
        Row {
            name: name.into(),
            check: check.into(),
            expected,
            actual,
            pass,
            millis: t.as_secs_f64() * 1000.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelftestOptions {
    /// Noninterference trials per entry; zero skips those rows.
    pub ni_trials: usize,
    pub seed: u64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions { ni_trials: 1000, seed: 0 }
    }
}

fn verdict_row(case: &Case, lat: &Lattice) -> Result<(Row, CheckReport)> {
    let t = Instant::now();
    let report = case.check(lat)?;
    let actual = Verdict::of(report.accepted);
    let mut pass = actual == case.entry.expect;
    let mut shown = format!("{actual:?}").to_lowercase();
    if let Some(line) = case.entry.side_condition_line {
        let hit = report.side_failures.iter().any(|s| s.line == Some(line));
        pass &= hit;
        shown.push_str(if hit { ", side condition on line " } else { ", no side condition on line " });
        shown.push_str(&line.to_string());
    }
    let mut expected = format!("{:?}", case.entry.expect).to_lowercase();
    if let Some(line) = case.entry.side_condition_line {
        expected.push_str(&format!(", side condition on line {line}"));
    }
    Ok((Row::new(&case.entry.name, "verdict", expected, shown, pass, t.elapsed()), report))
}

fn ni_row(case: &Case, report: &CheckReport, lat: &Lattice, opts: &SelftestOptions) -> Option<Row> {
    let t = Instant::now();
    if case.entry.leaks {
        let cfg = NiConfig { trials: 10_000, seed: opts.seed, force: true, stop_on_failure: true, ..Default::default() };
        let r = ni_trials(&case.source.cmd, report, lat, case.fixed(), &cfg);
        let actual = match &r.counterexample {
            Some(c) => format!("counterexample at trial {}", c.trial),
            None => format!("none in {} trials", r.attempted),
        };
        Some(Row::new(&case.entry.name, "ni --force", "counterexample".into(), actual, r.failed > 0, t.elapsed()))
    } else if report.accepted {
        let cfg = NiConfig { trials: opts.ni_trials, seed: opts.seed, ..Default::default() };
        let r = ni_trials(&case.source.cmd, report, lat, case.fixed(), &cfg);
        let actual = format!("{} failed, {} passed, {} discarded", r.failed, r.passed, r.discarded);
        Some(Row::new(&case.entry.name, "ni", "0 failed".into(), actual, r.failed == 0 && r.passed > 0, t.elapsed()))
    } else {
        None
    }
}

fn hs_row(case: &Case, lat: &Lattice) -> Result<Option<Row>> {
    let Some(g) = case.hs_env() else { return Ok(None) };
    let t = Instant::now();
    let c = bracket_all(&case.source.cmd);
    let a = ActiveSet::identity(g.keys());
    let k = construct_env(lat.bottom(), &g, &a, &c, lat)?;
    let v = verify_construction(&k.gt, &k.transformed, lat.bottom(), &k.initial, &k.active, lat)?;
    let conflicts = k.real_conflicts().count();
    let ext = k.extension_violations.len();
    let pass = v.ok && conflicts == 0 && ext == 0;
    let actual = format!(
        "{}, {} conflicts, {} extension violations",
        if v.ok { "verified" } else { "not verified" },
        conflicts,
        ext
    );
    Ok(Some(Row::new(&case.entry.name, "construct", "verified, 0 conflicts, 0 extension violations".into(), actual, pass, t.elapsed())))
}

fn golden_row(g: &Golden) -> Result<Row> {
    let t = Instant::now();
    let src = parse_program(require(&g.source)?)?;
    let want = parse_transformed_program(require(&g.transformed)?)?;
    let got = transform_program(&src.cmd)?;
    let pass = got.cmd == want.cmd;
    let actual = if pass { "match".to_string() } else { crate::parser::render_program(&got.cmd, None) };
    Ok(Row::new(&g.name, "transform", "match".into(), actual, pass, t.elapsed()))
}

/// Runs every corpus check: verdicts, transformation goldens, noninterference
/// trials and the fixed-level construction where labels allow it.
pub fn selftest(opts: &SelftestOptions) -> Result<Vec<Row>> {
    let lat = lattice();
    let m = manifest()?;
    let mut rows = Vec::new();
    for e in &m.entry {
        let case = Case::load(e, &lat)?;
        let (row, report) = verdict_row(&case, &lat)?;
        rows.push(row);
        if opts.ni_trials > 0 {
            rows.extend(ni_row(&case, &report, &lat, opts));
        }
        rows.extend(hs_row(&case, &lat)?);
    }
    for g in &m.golden {
        rows.push(golden_row(g)?);
    }
    Ok(rows)
}

/// Fixed-width conformance table.
pub fn render_table(rows: &[Row]) -> String {
    let w = |f: &dyn Fn(&Row) -> usize, min: usize| rows.iter().map(f).max().unwrap_or(0).max(min);
    let (wn, wc, we) = (w(&|r| r.name.len(), 4), w(&|r| r.check.len(), 5), w(&|r| r.expected.len(), 8));
    let mut out = format!("{:<wn$}  {:<wc$}  {:<we$}  {:<6}  {}\n", "name", "check", "expected", "result", "actual");
    for r in rows {
        out.push_str(&format!(
            "{:<wn$}  {:<wc$}  {:<we$}  {:<6}  {}\n",
            r.name,
            r.check,
            r.expected,
            if r.pass { "PASS" } else { "FAIL" },
            r.actual
        ));
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    out.push_str(&format!("{} rows, {} failed\n", rows.len(), failed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_files_exist() {
        let m = manifest().unwrap();
        for e in &m.entry {
            assert!(file(&e.program).is_some() && file(&e.labels).is_some(), "{}", e.name);
        }
        assert!(!m.golden.is_empty());
    }

    #[test]
    fn verdicts_match() {
        let lat = lattice();
        for case in cases(&lat).unwrap() {
            let (row, report) = verdict_row(&case, &lat).unwrap();
            assert!(row.pass, "{}: {}\n{}", row.name, row.actual, report.render_text(&lat));
        }
    }
}
