use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use iflow::analysis::{liveness, predicates, Cfg};
use iflow::corpus::{render_table, selftest, SelftestOptions};
use iflow::harness::{ni_test, NiConfig};
use iflow::hs::{construct_env, hs_check, hs_env_from, verify_construction};
use iflow::interp::{erasure_run, run, RunOutcome, DEFAULT_MAX_STEPS};
use iflow::lang::{Lattice, Memory, Var};
use iflow::parser::render::render_inits;
use iflow::parser::{parse_lattice, parse_program, render_labels, render_program, LabelFile, RawLabelFile, SourceProgram};
use iflow::transform::{bracket_all, transform_program, ActiveSet};
use iflow::typecheck::{check_program, resolve_env, CheckOptions};

#[derive(Parser)]
#[command(name = "iflow", version, about = "Information-flow checker for a small WHILE language")]
struct Cli {
    /// Lattice file; overrides a `lattice` line in the label file.
    #[arg(long, global = true)]
    lattice: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program and print it in canonical form.
    Parse { file: PathBuf },
    /// Print the transformed program.
    Transform {
        file: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Bracket every assignment first.
        #[arg(long)]
        fully_bracketed: bool,
    },
    /// Live sets and predicates at every site of the transformed program.
    Analyze {
        file: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Type check; exit 0 on accept, 1 on reject.
    Check {
        file: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Require bare levels (no dependent labels).
        #[arg(long)]
        levels_only: bool,
    },
    /// Run a program and print its final memory.
    Run {
        file: PathBuf,
        /// Run the transformed program under the erasure semantics.
        #[arg(long, requires = "labels")]
        erasure: bool,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: u64,
        /// Initial values, e.g. `x=3,y=0`.
        #[arg(long)]
        init: Option<String>,
    },
    /// Flow-sensitive baseline typing with fixed-level construction.
    Hs {
        file: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Write the transformed program and its constructed labels.
        #[arg(long)]
        construct: bool,
        /// Type check the construction with fixed levels.
        #[arg(long)]
        verify: bool,
        /// Output prefix for --construct (default: next to FILE).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Randomized noninterference trials.
    NiTest {
        file: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Test even if the checker rejects.
        #[arg(long)]
        force: bool,
        /// Observer level; random non-top level per trial by default.
        #[arg(long)]
        observer: Option<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: u64,
    },
    /// Run the bundled corpus and print a conformance table.
    Selftest {
        #[arg(long, default_value_t = 1000)]
        ni_trials: usize,
    },
}

type Fallible<T> = Result<T, String>;

fn read(path: &Path) -> Fallible<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Fallible<()> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn err(e: iflow::Error) -> String {
    e.to_string()
}

fn load_program(path: &Path) -> Fallible<SourceProgram> {
    parse_program(&read(path)?).map_err(|e| format!("{}:{}", path.display(), e))
}

struct Ctx {
    format: Format,
    seed: u64,
    lattice: Option<PathBuf>,
}

impl Ctx {
    /// The lattice from --lattice, else from the label file's `lattice`
    /// line (relative to that file), else two-point.
    fn lattice_for(&self, raw: Option<(&RawLabelFile, &Path)>) -> Fallible<Lattice> {
        let path = match (&self.lattice, raw.and_then(|(r, p)| r.lattice.as_ref().map(|l| (l, p)))) {
            (Some(p), _) => p.clone(),
            (None, Some((l, labels_path))) => labels_path.parent().unwrap_or(Path::new(".")).join(l),
            (None, None) => return Ok(Lattice::two_point()),
        };
        parse_lattice(&read(&path)?).map_err(|e| format!("{}:{}", path.display(), e))
    }

    fn labels(&self, path: &Path) -> Fallible<(Lattice, LabelFile)> {
        let raw = RawLabelFile::parse(&read(path)?).map_err(|e| format!("{}:{}", path.display(), e))?;
        let lat = self.lattice_for(Some((&raw, path)))?;
        let labels = raw.resolve(&lat).map_err(|e| format!("{}: {}", path.display(), e))?;
        Ok((lat, labels))
    }

    fn emit(&self, text: impl FnOnce() -> String, value: impl FnOnce() -> serde_json::Value) {
        match self.format {
            Format::Text => print!("{}", text()),
            Format::Json => println!("{}", serde_json::to_string_pretty(&value()).expect("serializable")),
        }
    }
}

fn parse_init(spec: &str) -> Fallible<Memory> {
    let mut m = Memory::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("bad --init entry `{part}`, expected x=n"))?;
        let n: i64 = v.trim().parse().map_err(|_| format!("bad value in --init entry `{part}`"))?;
        m.set(Var::new(k.trim()), n);
    }
    Ok(m)
}

fn memory_text(m: &Memory) -> String {
    m.iter().map(|(v, n)| format!("{v} = {n}\n")).collect()
}

fn cmd_parse(ctx: &Ctx, file: &Path) -> Fallible<u8> {
    let p = load_program(file)?;
    let text = format!("{}{}", render_inits(&p.inits), render_program(&p.cmd, None));
    let sites: Vec<_> = p
        .cmd
        .assignments()
        .iter()
        .map(|a| json!({"site": a.site.0, "line": p.line_of(a.site), "target": a.target, "bracketed": a.bracketed}))
        .collect();
    ctx.emit(|| text.clone(), || json!({"program": text, "inits": p.inits, "sites": sites, "vars": p.cmd.vars()}));
    Ok(0)
}

fn cmd_transform(ctx: &Ctx, file: &Path, out: Option<&Path>, fully: bool) -> Fallible<u8> {
    let p = load_program(file)?;
    let c = if fully { bracket_all(&p.cmd) } else { p.cmd.clone() };
    let t = transform_program(&c).map_err(err)?;
    let text = format!("{}{}", render_inits(&p.inits), render_program(&t.cmd, Some(&t.active)));
    if let Some(out) = out {
        write(out, &text)?;
    }
    ctx.emit(|| if out.is_some() { String::new() } else { text.clone() }, || json!({"program": text, "initial": t.initial, "active": t.active}));
    Ok(0)
}

fn cmd_analyze(ctx: &Ctx, file: &Path, labels: &Path) -> Fallible<u8> {
    let p = load_program(file)?;
    let (_, labels) = ctx.labels(labels)?;
    let t = transform_program(&p.cmd).map_err(err)?;
    let env = resolve_env(&labels, &t.vars()).map_err(err)?;
    let live = liveness(&Cfg::build(&t.cmd), &env, &t.active);
    let preds = predicates(&t.cmd);
    let mut rows = Vec::new();
    let mut text = render_program(&t.cmd, Some(&t.active));
    text.push('\n');
    for a in t.cmd.assignments() {
        let line = p.line_of(a.site);
        let facts = preds.get(&a.site).cloned().unwrap_or_default();
        let (before, after) = (live.before(a.site).cloned().unwrap_or_default(), live.after(a.site).cloned().unwrap_or_default());
        let names = |s: &std::collections::BTreeSet<Var>| s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ");
        text.push_str(&format!(
            "site {}{}: {} := {}\n  live before: {{{}}}\n  live after:  {{{}}}\n  facts: {}\n",
            a.site.0,
            line.map(|l| format!(" (line {l})")).unwrap_or_default(),
            a.target,
            a.rhs,
            names(&before),
            names(&after),
            facts
        ));
        rows.push(json!({
            "site": a.site.0, "line": line, "target": a.target, "rhs": a.rhs.to_string(),
            "live_before": before, "live_after": after, "facts": facts,
        }));
    }
    ctx.emit(|| text, || json!({"active": t.active, "sites": rows}));
    Ok(0)
}

fn cmd_check(ctx: &Ctx, file: &Path, labels: &Path, levels_only: bool) -> Fallible<u8> {
    let p = load_program(file)?;
    let (lat, labels) = ctx.labels(labels)?;
    let opts = CheckOptions { levels_only, ..Default::default() };
    let mut r = check_program(&p.cmd, &labels, &lat, &opts).map_err(err)?;
    r.annotate_lines(&p.site_lines);
    ctx.emit(|| r.render_text(&lat), || serde_json::to_value(r.view(&lat)).expect("serializable"));
    Ok(if r.accepted { 0 } else { 1 })
}

fn cmd_run(ctx: &Ctx, file: &Path, erasure: bool, labels: Option<&Path>, max_steps: u64, init: Option<&str>) -> Fallible<u8> {
    let p = load_program(file)?;
    let mut m0: Memory = p.inits.iter().map(|(v, n)| (v.clone(), *n)).collect();
    if let Some(spec) = init {
        m0.overlay(&parse_init(spec)?);
    }
    let outcome = if erasure {
        let (_, labels) = ctx.labels(labels.expect("clap enforces --labels"))?;
        let t = transform_program(&p.cmd).map_err(err)?;
        let env = resolve_env(&labels, &t.vars()).map_err(err)?;
        let live = liveness(&Cfg::build(&t.cmd), &env, &t.active);
        erasure_run(&t.cmd, &m0, &env, &live, max_steps)
    } else {
        run(&p.cmd, &m0, max_steps)
    };
    let code = if matches!(outcome, RunOutcome::Terminated { .. }) { 0 } else { 1 };
    ctx.emit(
        || match &outcome {
            RunOutcome::Terminated { memory, .. } => memory_text(memory),
            RunOutcome::StepLimit { memory, steps } => format!("step limit reached after {steps} steps\n{}", memory_text(memory)),
            RunOutcome::RuntimeError { memory, fault } => format!(
                "runtime error{}: {} in `{}`\n{}",
                fault.site.map(|s| format!(" at line {}", p.line_of(s).unwrap_or(s.0 as usize))).unwrap_or_default(),
                fault.error,
                fault.expr,
                memory_text(memory)
            ),
        },
        || match &outcome {
            RunOutcome::RuntimeError { memory, fault } => json!({
                "outcome": "runtime_error",
                "memory": memory,
                "error": fault.error.to_string(),
                "expr": fault.expr.to_string(),
                "line": fault.site.and_then(|s| p.line_of(s)),
            }),
            _ => serde_json::to_value(&outcome).expect("serializable"),
        },
    );
    Ok(code)
}

#[derive(Serialize)]
struct HsOutput {
    env: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    constructed: Option<BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verified: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    written: Vec<String>,
}

fn cmd_hs(ctx: &Ctx, file: &Path, labels: &Path, construct: bool, verify: bool, out: Option<&Path>) -> Fallible<u8> {
    let p = load_program(file)?;
    let (lat, labels) = ctx.labels(labels)?;
    let vars = p.cmd.vars();
    let g = hs_env_from(&resolve_env(&labels, &vars).map_err(err)?, &vars).map_err(err)?;
    let pc = lat.bottom();
    let fin = hs_check(pc, &g, &p.cmd, &lat).map_err(err)?;
    let names = |m: &BTreeMap<Var, iflow::lang::LevelId>| -> BTreeMap<String, String> {
        m.iter().map(|(v, l)| (v.to_string(), lat.name(*l).to_string())).collect()
    };
    let mut output = HsOutput { env: names(&fin), constructed: None, verified: None, written: Vec::new() };
    let mut code = 0;
    if construct || verify {
        let c = if p.cmd.is_fully_bracketed() {
            p.cmd.clone()
        } else {
            eprintln!("note: bracketing every assignment for the construction");
            bracket_all(&p.cmd)
        };
        let k = construct_env(pc, &g, &ActiveSet::identity(g.keys()), &c, &lat).map_err(err)?;
        output.constructed = Some(names(&k.gt.levels));
        if construct {
            let prefix = out.map(Path::to_path_buf).unwrap_or_else(|| file.with_extension("constructed"));
            let with = |ext: &str| PathBuf::from(format!("{}.{ext}", prefix.display()));
            let (pw, pl) = (with("while"), with("labels"));
            let lf = LabelFile::from_env(&k.gt.to_env());
            write(&pw, &format!("{}{}", render_inits(&p.inits), render_program(&k.transformed, Some(&k.active))))?;
            write(&pl, &render_labels(&lf, &lat))?;
            output.written = vec![pw.display().to_string(), pl.display().to_string()];
        }
        if verify {
            let v = verify_construction(&k.gt, &k.transformed, pc, &k.initial, &k.active, &lat).map_err(err)?;
            output.verified = Some(v.ok);
            if !v.ok {
                code = 1;
                if ctx.format == Format::Text {
                    eprint!("{}", v.report.render_text(&lat));
                    for x in &v.outside_domain {
                        eprintln!("binding outside the expected domain: {x}");
                    }
                }
            }
        }
    }
    ctx.emit(
        || {
            let mut s = String::new();
            for (v, l) in &output.env {
                s.push_str(&format!("{v} : {l}\n"));
            }
            if let Some(c) = &output.constructed {
                s.push_str("constructed:\n");
                for (v, l) in c {
                    s.push_str(&format!("  {v} : {l}\n"));
                }
            }
            if let Some(ok) = output.verified {
                s.push_str(if ok { "verified\n" } else { "not verified\n" });
            }
            for w in &output.written {
                s.push_str(&format!("wrote {w}\n"));
            }
            s
        },
        || serde_json::to_value(&output).expect("serializable"),
    );
    Ok(code)
}

#[allow(clippy::too_many_arguments)]
fn cmd_ni(ctx: &Ctx, file: &Path, labels: &Path, trials: usize, force: bool, observer: Option<&str>, max_steps: u64) -> Fallible<u8> {
    let p = load_program(file)?;
    let (lat, labels) = ctx.labels(labels)?;
    let observer = observer.map(|o| lat.level(o)).transpose().map_err(err)?;
    let cfg = NiConfig { trials, seed: ctx.seed, max_steps, observer, force, ..Default::default() };
    let r = ni_test(&p, &labels, &lat, &cfg).map_err(err)?;
    ctx.emit(
        || {
            let mut s = format!(
                "checker: {}\ntrials: {}\npassed: {}\nfailed: {}\ndiscarded: {} (diverged {}, no equivalent pair {}, runtime error {})\n",
                if r.accepted { "accept" } else { "reject" },
                r.attempted,
                r.passed,
                r.failed,
                r.discarded,
                r.discarded_divergence,
                r.discarded_resample,
                r.discarded_runtime_error
            );
            if let Some(c) = &r.counterexample {
                s.push_str(&format!(
                    "counterexample (trial {}, observer {}): {}\n  m1: {}\n  m2: {}\n  final m1: {}\n  final m2: {}\n",
                    c.trial, c.observer, c.note, c.initial1, c.initial2, c.final1, c.final2
                ));
            }
            s
        },
        || {
            let mut v = serde_json::to_value(&r).expect("serializable");
            if let Some(d) = r.counterexample.as_ref().and_then(|c| c.diff.as_ref()) {
                let diff = &mut v["counterexample"]["diff"];
                diff["level1"] = json!(lat.name(d.level1));
                diff["level2"] = json!(lat.name(d.level2));
            }
            v
        },
    );
    Ok(if r.failed > 0 { 1 } else { 0 })
}

fn cmd_selftest(ctx: &Ctx, ni_trials: usize) -> Fallible<u8> {
    let rows = selftest(&SelftestOptions { ni_trials, seed: ctx.seed }).map_err(err)?;
    let ok = rows.iter().all(|r| r.pass);
    ctx.emit(|| render_table(&rows), || json!({"passed": ok, "rows": rows}));
    Ok(if ok { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { format: cli.format, seed: cli.seed, lattice: cli.lattice };
    let result = match &cli.cmd {
        Command::Parse { file } => cmd_parse(&ctx, file),
        Command::Transform { file, out, fully_bracketed } => cmd_transform(&ctx, file, out.as_deref(), *fully_bracketed),
        Command::Analyze { file, labels } => cmd_analyze(&ctx, file, labels),
        Command::Check { file, labels, levels_only } => cmd_check(&ctx, file, labels, *levels_only),
        Command::Run { file, erasure, labels, max_steps, init } => {
            cmd_run(&ctx, file, *erasure, labels.as_deref(), *max_steps, init.as_deref())
        }
        Command::Hs { file, labels, construct, verify, out } => cmd_hs(&ctx, file, labels, *construct, *verify, out.as_deref()),
        Command::NiTest { file, labels, trials, force, observer, max_steps } => {
            cmd_ni(&ctx, file, labels, *trials, *force, observer.as_deref(), *max_steps)
        }
        Command::Selftest { ni_trials } => cmd_selftest(&ctx, *ni_trials),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
