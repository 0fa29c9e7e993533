use std::path::{Path, PathBuf};
use std::process::ExitCode;

use causat::frontdoor;
use causat::lang::{
    classify, parse_document, parse_formula, parse_formulas, parse_signature, print_formula, print_signature,
    print_term, ProbFormula, Signature, Term,
};
use causat::reduction::{decide_causal_sat, trace, DecideConfig, DecideStats, Decision, Mode};
use causat::scm::Scm;
use causat::solver::{
    build_etr, check_entailment, emit_smtlib, AutoSolver, Entailment, ExternalSolver, LinearSolver, NumericConfig,
    NumericSolver, ProbSolver, SolverConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "causat", version, about = "Satisfiability and model checking for causal probability formulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Clone)]
struct Opts {
    /// File holding the `sig ...;` block, for formula files without one.
    #[arg(long, global = true)]
    sig: Option<PathBuf>,
    /// Model file (JSON).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Formula text, used instead of (or as the conclusion alongside) a file.
    #[arg(long, global = true)]
    formula: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Backend::Auto)]
    backend: Backend,
    /// External solver command; the SMT-LIB file path is appended.
    #[arg(long, global = true)]
    solver_cmd: Option<String>,
    /// Most solver calls during the certificate search.
    #[arg(long, global = true)]
    budget_certs: Option<usize>,
    /// Numeric search restarts.
    #[arg(long, global = true)]
    budget_restarts: Option<usize>,
    #[arg(long, global = true)]
    timeout_ms: Option<u64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Print the probabilistic formula the causal one reduces to.
    #[arg(long, global = true)]
    emit_reduction: bool,
    /// Search certificates one at a time instead of one call per order.
    #[arg(long, global = true)]
    enumerate: bool,
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print formulas in canonical form.
    Parse { file: Option<PathBuf> },
    /// Report the fragment and whether interventions occur.
    Classify { file: Option<PathBuf> },
    /// Evaluate formulas on the model given by --model.
    Check { file: Option<PathBuf> },
    /// Decide satisfiability of the conjunction of the formulas.
    Solve {
        file: Option<PathBuf>,
        /// Write the witness model here.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Decide whether the premises in FILE entail --formula.
    Entail { file: PathBuf },
    /// Find a certificate under which the formula is satisfiable and print its reduction.
    Reduce { file: Option<PathBuf> },
    /// Write the polynomial system of a probabilistic formula as SMT-LIB.
    EmitSmt {
        file: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check the front-door constraints and identification formula on random models.
    DemoFrontdoor {
        /// Number of consecutive seeds starting at --seed.
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Also derive P([X=1]Y=1) from pinned observational values.
        #[arg(long)]
        entail: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Linear,
    Numeric,
    External,
    Auto,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

const EXIT_TRUE: u8 = 0;
const EXIT_FALSE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_UNKNOWN: u8 = 3;

enum Failure {
    Usage(String),
    Unknown(String),
}

type Run = Result<u8, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_TRUE };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let o = &cli.opts;
    let res = match &cli.command {
        Command::Parse { file } => cmd_parse(o, file.as_deref(), false),
        Command::Classify { file } => cmd_parse(o, file.as_deref(), true),
        Command::Check { file } => cmd_check(o, file.as_deref()),
        Command::Solve { file, witness } => cmd_solve(o, file.as_deref(), witness.as_deref()),
        Command::Entail { file } => cmd_entail(o, file),
        Command::Reduce { file } => cmd_reduce(o, file.as_deref()),
        Command::EmitSmt { file, output } => cmd_emit_smt(o, file.as_deref(), output.as_deref()),
        Command::DemoFrontdoor { count, entail } => cmd_demo(o, *count, *entail),
    };
    let code = match res {
        Ok(c) => c,
        Err(Failure::Usage(msg)) => {
            report_error(o, "error", &msg);
            EXIT_USAGE
        }
        Err(Failure::Unknown(msg)) => {
            report_error(o, "unknown", &msg);
            EXIT_UNKNOWN
        }
    };
    ExitCode::from(code)
}

fn report_error(o: &Opts, kind: &str, msg: &str) {
    match o.format {
        Format::Human => eprintln!("{msg}"),
        Format::Json => out(&format!("{}\n", json!({ "status": kind, "message": msg }))),
    }
}

/// Write to stdout, ignoring a closed pipe.
fn out(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn emit(o: &Opts, record: Value, human: impl FnOnce() -> String) {
    match o.format {
        Format::Human => out(&(human() + "\n")),
        Format::Json => out(&format!("{record}\n")),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_model(o: &Opts) -> Result<Option<Scm>, Failure> {
    let Some(path) = &o.model else { return Ok(None) };
    let m = Scm::from_json(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Err(e) = m.find_order() {
        let sig = m.sig();
        let endo: Vec<String> =
            e.endo.iter().enumerate().map(|(v, &x)| format!("{}={}", sig.var_name(v), sig.value_name(v, x))).collect();
        let exo: Vec<String> =
            m.exo().iter().zip(&e.exo).map(|(d, &x)| format!("{}={}", d.name, d.domain[x])).collect();
        return Err(usage(format!(
            "{}: model is not recursive: f_{} depends on {} at entry [{}] [{}]",
            path.display(),
            sig.var_name(e.var),
            sig.var_name(e.input),
            endo.join(", "),
            exo.join(", ")
        )));
    }
    Ok(Some(m))
}

fn starts_with_sig(src: &str) -> bool {
    src.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#')).is_some_and(|l| l.starts_with("sig"))
}

/// Signature and formulas from a file or `--formula`. A signature comes
/// from the text's own header, else `--sig`, else `fallback`.
fn load_formulas(
    o: &Opts,
    file: Option<&Path>,
    fallback: Option<&Signature>,
) -> Result<(Signature, Vec<ProbFormula>), Failure> {
    let (src, name) = match (file, &o.formula) {
        (Some(p), _) => (read(p)?, p.display().to_string()),
        (None, Some(t)) => (t.clone(), "--formula".to_string()),
        (None, None) => return Err(usage("no input: give a file or --formula")),
    };
    let diag = |e: causat::lang::ParseError| usage(format!("{name}: {}", e.render(&src)));
    if starts_with_sig(&src) {
        return parse_document(&src).map_err(diag);
    }
    let sig = match (&o.sig, fallback) {
        (Some(p), _) => {
            let text = read(p)?;
            parse_signature(&text).map_err(|e| usage(format!("{}: {}", p.display(), e.render(&text))))?
        }
        (None, Some(s)) => s.clone(),
        (None, None) => return Err(usage(format!("{name}: no signature; start with `sig ...;` or pass --sig"))),
    };
    let fs = parse_formulas(&src, &sig).map_err(diag)?;
    Ok((sig, fs))
}

fn conjunction(fs: Vec<ProbFormula>) -> Result<ProbFormula, Failure> {
    ProbFormula::and_all(fs).ok_or_else(|| usage("input has no formulas"))
}

fn cmd_parse(o: &Opts, file: Option<&Path>, classify_only: bool) -> Run {
    let model = load_model(o)?;
    let (sig, fs) = load_formulas(o, file, model.as_ref().map(Scm::sig))?;
    if classify_only {
        let frags: Vec<_> = fs.iter().map(classify).collect();
        let all = classify(&conjunction(fs.clone())?);
        let yes_no = |b: bool| if b { "yes" } else { "no" };
        let record = json!({
            "command": "classify",
            "fragment": all.arithmetic.to_string(),
            "causal": all.causal,
            "formulas": frags.iter().map(|f| json!({"fragment": f.arithmetic.to_string(), "causal": f.causal})).collect::<Vec<_>>(),
        });
        emit(o, record, || {
            let mut out = String::new();
            if frags.len() > 1 {
                for (k, f) in frags.iter().enumerate() {
                    out.push_str(&format!("[{}] fragment: {}, causal: {}\n", k + 1, f.arithmetic, yes_no(f.causal)));
                }
            }
            out.push_str(&format!("fragment: {}, causal: {}", all.arithmetic, yes_no(all.causal)));
            out
        });
    } else {
        let texts: Vec<String> = fs.iter().map(|f| print_formula(&sig, f)).collect();
        let record = json!({ "command": "parse", "signature": print_signature(&sig), "formulas": texts });
        emit(o, record, || {
            let mut out = print_signature(&sig);
            for t in &texts {
                out.push('\n');
                out.push_str(t);
                out.push(';');
            }
            out
        });
    }
    Ok(EXIT_TRUE)
}

fn cmd_check(o: &Opts, file: Option<&Path>) -> Run {
    let m = load_model(o)?.ok_or_else(|| usage("check needs --model"))?;
    let (sig, fs) = load_formulas(o, file, Some(m.sig()))?;
    if &sig != m.sig() {
        return Err(usage("formula signature differs from the model's"));
    }
    let mut ev = m.evaluator();
    let mut all = true;
    for f in &fs {
        let mut atoms = Vec::new();
        let mut err = None;
        f.visit_atoms(&mut |a: &Term, b: &Term| match (ev.term_value(a), ev.term_value(b)) {
            (Ok(x), Ok(y)) => atoms.push((print_term(&sig, a), x, print_term(&sig, b), y)),
            (Err(e), _) | (_, Err(e)) => err = Some(e),
        });
        if let Some(e) = err {
            return Err(usage(e.to_string()));
        }
        let truth = ev.model_check(f).map_err(|e| usage(e.to_string()))?;
        all &= truth;
        let text = print_formula(&sig, f);
        let record = json!({
            "command": "check",
            "formula": text,
            "value": truth,
            "atoms": atoms.iter().map(|(a, x, b, y)| json!({
                "lhs": a, "lhs_value": x.to_string(), "rhs": b, "rhs_value": y.to_string(), "holds": x >= y,
            })).collect::<Vec<_>>(),
        });
        emit(o, record, || {
            let mut out = text.clone();
            for (a, x, b, y) in &atoms {
                out.push_str(&format!("\n  {a} = {x}\n  {b} = {y}\n    {a} >= {b}: {}", x >= y));
            }
            out.push_str(&format!("\n{truth}"));
            out
        });
    }
    Ok(if all { EXIT_TRUE } else { EXIT_FALSE })
}

fn numeric_config(o: &Opts) -> NumericConfig {
    let mut c = NumericConfig { seed: o.seed, ..NumericConfig::default() };
    if let Some(r) = o.budget_restarts {
        c.restarts = r;
    }
    c
}

fn solver(o: &Opts) -> Result<Box<dyn ProbSolver>, Failure> {
    let external = || -> Result<Option<ExternalSolver>, Failure> {
        let cfg = SolverConfig::resolve(o.solver_cmd.as_deref(), o.timeout_ms).map_err(|e| usage(e.to_string()))?;
        Ok(cfg.map(|config| ExternalSolver { config }))
    };
    Ok(match o.backend {
        Backend::Linear => Box::new(LinearSolver::default()),
        Backend::Numeric => Box::new(NumericSolver { config: numeric_config(o) }),
        Backend::External => {
            Box::new(external()?.ok_or_else(|| {
                usage("no external solver configured; use --solver-cmd, CAUSAT_SOLVER or causat.toml")
            })?)
        }
        Backend::Auto => Box::new(AutoSolver {
            linear: LinearSolver::default(),
            numeric: NumericSolver { config: numeric_config(o) },
            external: external()?,
        }),
    })
}

fn decide_config(o: &Opts) -> DecideConfig {
    let mut c =
        DecideConfig { mode: if o.enumerate { Mode::Enumerate } else { Mode::Saturate }, ..DecideConfig::default() };
    if let Some(b) = o.budget_certs {
        c.budget = b;
    }
    c
}

fn stats_json(s: &DecideStats) -> Value {
    json!({ "orders": s.orders, "solver_calls": s.solver_calls, "descriptions": s.descriptions })
}

fn stats_line(s: &DecideStats) -> String {
    format!("orders {}, solver calls {}, descriptions {}", s.orders, s.solver_calls, s.descriptions)
}

fn model_json(m: &Scm) -> Value {
    serde_json::from_str(&m.to_json()).expect("model JSON is valid")
}

fn cmd_solve(o: &Opts, file: Option<&Path>, witness: Option<&Path>) -> Run {
    let (sig, fs) = load_formulas(o, file, None)?;
    let phi = conjunction(fs)?;
    let backend = solver(o)?;
    let d = decide_causal_sat(&sig, &phi, backend.as_ref(), &decide_config(o))
        .map_err(|e| Failure::Unknown(e.to_string()))?;
    let stats = d.stats().clone();
    match d {
        Decision::Sat(w, _) => {
            if let Some(path) = witness {
                std::fs::write(path, w.model.to_json() + "\n")
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?;
            }
            let reduction = match (&w.certificate, &w.reduction) {
                (Some(c), Some(r)) if o.emit_reduction => Some(trace(&sig, c, r)),
                _ => None,
            };
            let mut record = json!({ "verdict": "sat", "witness": model_json(&w.model), "stats": stats_json(&stats) });
            if let Some(t) = &reduction {
                record["reduction"] = json!(t);
            }
            emit(o, record, || {
                let mut out = String::from("SAT");
                if o.verbose {
                    out.push_str(&format!("\n{}", stats_line(&stats)));
                }
                if let Some(t) = &reduction {
                    out.push('\n');
                    out.push_str(t.trim_end());
                }
                out.push('\n');
                out.push_str(&w.model.to_json());
                out
            });
            Ok(EXIT_TRUE)
        }
        Decision::Unsat(_) => {
            emit(o, json!({ "verdict": "unsat", "stats": stats_json(&stats) }), || verdict_line("UNSAT", o, &stats));
            Ok(EXIT_FALSE)
        }
        Decision::Unknown { reason, .. } => {
            emit(o, json!({ "verdict": "unknown", "reason": reason, "stats": stats_json(&stats) }), || {
                verdict_line(&format!("UNKNOWN: {reason}"), o, &stats)
            });
            Ok(EXIT_UNKNOWN)
        }
    }
}

fn verdict_line(head: &str, o: &Opts, stats: &DecideStats) -> String {
    if o.verbose {
        format!("{head}\n{}", stats_line(stats))
    } else {
        head.to_string()
    }
}

fn cmd_entail(o: &Opts, file: &Path) -> Run {
    let src = read(file)?;
    let (sig, gamma) = if starts_with_sig(&src) {
        parse_document(&src)
    } else {
        let Some(p) = &o.sig else { return Err(usage(format!("{}: no signature", file.display()))) };
        parse_signature(&read(p)?).and_then(|s| parse_formulas(&src, &s).map(|g| (s, g)))
    }
    .map_err(|e| usage(format!("{}: {}", file.display(), e.render(&src))))?;
    let text = o.formula.as_deref().ok_or_else(|| usage("entail needs the conclusion as --formula"))?;
    let phi = parse_formula(text, &sig).map_err(|e| usage(format!("--formula: {}", e.render(text))))?;
    let backend = solver(o)?;
    let verdict = check_entailment(&sig, &gamma, &phi, backend.as_ref(), &decide_config(o))
        .map_err(|e| Failure::Unknown(e.to_string()))?;
    Ok(match verdict {
        Entailment::Entails => {
            emit(o, json!({ "verdict": "entails" }), || "ENTAILS".into());
            EXIT_TRUE
        }
        Entailment::Counterexample(m) => {
            emit(o, json!({ "verdict": "counterexample", "witness": model_json(&m) }), || {
                format!("COUNTEREXAMPLE\n{}", m.to_json())
            });
            EXIT_FALSE
        }
        Entailment::Unknown(reason) => {
            emit(o, json!({ "verdict": "unknown", "reason": reason }), || format!("UNKNOWN: {reason}"));
            EXIT_UNKNOWN
        }
    })
}

fn cmd_reduce(o: &Opts, file: Option<&Path>) -> Run {
    let (sig, fs) = load_formulas(o, file, None)?;
    let phi = conjunction(fs)?;
    if !classify(&phi).causal {
        return Err(usage("formula has no interventions; there is nothing to reduce"));
    }
    let backend = solver(o)?;
    let cfg = DecideConfig { mode: Mode::Enumerate, ..decide_config(o) };
    let d = decide_causal_sat(&sig, &phi, backend.as_ref(), &cfg).map_err(|e| Failure::Unknown(e.to_string()))?;
    let stats = d.stats().clone();
    match d {
        Decision::Sat(w, _) => {
            let (c, r) = (w.certificate.as_ref().expect("causal"), w.reduction.as_ref().expect("causal"));
            let t = trace(&sig, c, r);
            let record = json!({
                "verdict": "sat",
                "signature": print_signature(&r.sig),
                "formula": print_formula(&r.sig, &r.psi),
                "trace": t,
                "stats": stats_json(&stats),
            });
            emit(o, record, || t.trim_end().to_string());
            Ok(EXIT_TRUE)
        }
        Decision::Unsat(_) => {
            emit(o, json!({ "verdict": "unsat", "stats": stats_json(&stats) }), || {
                verdict_line("UNSAT: no certificate yields a satisfiable reduction", o, &stats)
            });
            Ok(EXIT_FALSE)
        }
        Decision::Unknown { reason, .. } => Err(Failure::Unknown(format!("no certificate found: {reason}"))),
    }
}

fn cmd_emit_smt(o: &Opts, file: Option<&Path>, output: Option<&Path>) -> Run {
    let (sig, fs) = load_formulas(o, file, None)?;
    let phi = conjunction(fs)?;
    if classify(&phi).causal {
        return Err(usage("emit-smt takes a formula without interventions; run reduce first"));
    }
    let sys = build_etr(&sig, &phi).map_err(|e| usage(e.to_string()))?;
    let text = emit_smtlib(&sys);
    match output {
        Some(p) => {
            std::fs::write(p, &text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            emit(
                o,
                json!({ "command": "emit-smt", "path": p.display().to_string(), "vars": sys.vars.len(), "constraints": sys.constraints.len() }),
                || {
                    format!(
                        "wrote {} ({} variables, {} constraints)",
                        p.display(),
                        sys.vars.len(),
                        sys.constraints.len()
                    )
                },
            );
        }
        None => out(&text),
    }
    Ok(EXIT_TRUE)
}

fn cmd_demo(o: &Opts, count: u64, entail: bool) -> Run {
    let mut all = true;
    for seed in o.seed..o.seed.saturating_add(count) {
        let r = frontdoor::demo(seed);
        all &= r.passed();
        let mut entails = None;
        if entail {
            let m = frontdoor::demo_scm(&r.weights);
            let (gamma, phi) = frontdoor::entailment_instance(&m, 1, 1).map_err(|e| usage(e.to_string()))?;
            let v =
                check_entailment(&frontdoor::signature(), &gamma, &phi, &LinearSolver::default(), &decide_config(o))
                    .map_err(|e| Failure::Unknown(e.to_string()))?;
            let ok = matches!(v, Entailment::Entails);
            all &= ok;
            entails = Some(ok);
        }
        let record = json!({
            "command": "demo-frontdoor",
            "seed": seed,
            "weights": r.weights.0.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
            "gamma": r.gamma.iter().map(|(l, t, v)| json!({"label": l, "formula": t, "value": v})).collect::<Vec<_>>(),
            "identification": r.eq2.iter().map(|e| json!({"x": e.x, "y": e.y, "lhs": e.lhs.to_string(), "rhs": e.rhs.to_string()})).collect::<Vec<_>>(),
            "entails": entails,
            "pass": r.passed() && entails != Some(false),
        });
        emit(o, record, || {
            let mut out = r.to_string();
            if let Some(ok) = entails {
                out.push_str(&format!(
                    "\n  pinned premises entail P([X=1]Y=1) = {}: {}",
                    r.eq2[3].rhs,
                    if ok { "ENTAILS" } else { "NOT PROVEN" }
                ));
            }
            out
        });
    }
    Ok(if all { EXIT_TRUE } else { EXIT_FALSE })
}
