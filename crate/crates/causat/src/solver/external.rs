//! Running an outside SMT solver on emitted SMT-LIB text.
//!
//! The solver command comes from, in order: an explicit setting, the
//! `CAUSAT_SOLVER` environment variable, or the `solver_cmd` key of the
//! config file (`CAUSAT_CONFIG`, else `./causat.toml`). The command gets
//! the path of a temporary `.smt2` file as its last argument and must
//! print `sat`, `unsat` or `unknown`, optionally followed by a model.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Deserialize;
use thiserror::Error;
use wait_timeout::ChildExt;

use super::etr::build_etr;
use super::numeric::round_point;
use super::smtlib::emit_smtlib;
use super::{ProbOutcome, ProbSolver, SolverError};
use crate::lang::{ProbFormula, Signature};

pub const SOLVER_ENV: &str = "CAUSAT_SOLVER";
pub const CONFIG_ENV: &str = "CAUSAT_CONFIG";
pub const CONFIG_FILE: &str = "causat.toml";
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExternalError {
    #[error("no external solver configured")]
    NotConfigured,
    #[error("bad solver config: {0}")]
    Config(String),
    #[error("could not launch solver: {0}")]
    Launch(String),
    #[error("solver timed out after {0} ms")]
    Timeout(u64),
    #[error("malformed solver response: {0}")]
    Malformed(String),
    #[error("i/o error talking to solver: {0}")]
    Io(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
struct ConfigFile {
    solver_cmd: Option<String>,
    timeout_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    pub command: String,
    pub timeout_ms: u64,
}

impl SolverConfig {
    pub fn new(command: impl Into<String>) -> Self {
        SolverConfig { command: command.into(), timeout_ms: DEFAULT_TIMEOUT_MS }
    }

    /// Resolve from an explicit command, then the environment, then the
    /// config file. `Ok(None)` when nothing names a solver.
    pub fn resolve(command: Option<&str>, timeout_ms: Option<u64>) -> Result<Option<Self>, ExternalError> {
        let path = std::env::var_os(CONFIG_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(CONFIG_FILE));
        let file = Self::read_file(&path)?;
        let env = std::env::var(SOLVER_ENV).ok().filter(|s| !s.trim().is_empty());
        let Some(cmd) = command.map(str::to_string).or(env).or(file.solver_cmd) else {
            return Ok(None);
        };
        Ok(Some(SolverConfig {
            command: cmd,
            timeout_ms: timeout_ms.or(file.timeout_ms).unwrap_or(DEFAULT_TIMEOUT_MS),
        }))
    }

    fn read_file(path: &Path) -> Result<ConfigFile, ExternalError> {
        match std::fs::read_to_string(path) {
            Ok(text) => toml::from_str(&text).map_err(|e| ExternalError::Config(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(ConfigFile::default()),
            Err(e) => Err(ExternalError::Config(format!("{}: {e}", path.display()))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelValue {
    Exact(BigRational),
    /// An algebraic or printed-inexact value, with the solver's text.
    Approx(f64, String),
}

impl ModelValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            ModelValue::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
            ModelValue::Approx(x, _) => *x,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolverResponse {
    Sat(Vec<(String, ModelValue)>),
    Unsat,
    Unknown(String),
}

impl SolverResponse {
    pub fn value(&self, name: &str) -> Option<&ModelValue> {
        match self {
            SolverResponse::Sat(m) => m.iter().find(|(n, _)| n == name).map(|(_, v)| v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Result<Vec<String>, ExternalError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' | ')' => {
                out.push(c.to_string());
                chars.next();
            }
            ';' => while chars.next().is_some_and(|c| c != '\n') {},
            '"' => {
                let mut s = String::from('"');
                chars.next();
                loop {
                    match chars.next() {
                        Some('"') if chars.peek() == Some(&'"') => {
                            chars.next();
                            s.push('"');
                        }
                        Some('"') => break,
                        Some(c) => s.push(c),
                        None => return Err(ExternalError::Malformed("unterminated string".into())),
                    }
                }
                out.push(s);
            }
            '|' => {
                let mut s = String::new();
                chars.next();
                loop {
                    match chars.next() {
                        Some('|') => break,
                        Some(c) => s.push(c),
                        None => return Err(ExternalError::Malformed("unterminated quoted symbol".into())),
                    }
                }
                out.push(s);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                out.push(s);
            }
        }
    }
    Ok(out)
}

fn parse_sexps(text: &str) -> Result<Vec<Sexp>, ExternalError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for t in tokenize(text)? {
        match t.as_str() {
            "(" => {
                if stack.len() > 256 {
                    return Err(ExternalError::Malformed("nesting too deep".into()));
                }
                stack.push(Vec::new());
            }
            ")" => {
                let done = stack.pop().unwrap();
                let Some(top) = stack.last_mut() else {
                    return Err(ExternalError::Malformed("unbalanced ')'".into()));
                };
                top.push(Sexp::List(done));
            }
            _ => stack.last_mut().unwrap().push(Sexp::Atom(t)),
        }
        if stack.is_empty() {
            return Err(ExternalError::Malformed("unbalanced ')'".into()));
        }
    }
    if stack.len() != 1 {
        return Err(ExternalError::Malformed("unbalanced '('".into()));
    }
    Ok(stack.pop().unwrap())
}

fn numeral(s: &str) -> Option<ModelValue> {
    if let Some(body) = s.strip_suffix('?') {
        return body.parse::<f64>().ok().map(|x| ModelValue::Approx(x, s.to_string()));
    }
    if s.is_empty() || !s.chars().all(|c| c.is_ascii_digit() || c == '.') || s.starts_with('.') || s.ends_with('.') {
        return None;
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.contains('.') {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = BigInt::from(10u32).pow(frac.len() as u32);
    Some(ModelValue::Exact(BigRational::new(digits, scale)))
}

/// Univariate polynomial in the bound variable of a `root-obj`, as
/// coefficients by degree.
fn univariate(e: &Sexp) -> Option<Vec<BigRational>> {
    let add = |a: Vec<BigRational>, b: Vec<BigRational>| {
        let mut out = vec![BigRational::zero(); a.len().max(b.len())];
        for (i, x) in a.into_iter().enumerate() {
            out[i] += x;
        }
        for (i, x) in b.into_iter().enumerate() {
            out[i] += x;
        }
        out
    };
    let mul = |a: &[BigRational], b: &[BigRational]| {
        let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    };
    match e {
        Sexp::Atom(s) => match numeral(s) {
            Some(ModelValue::Exact(q)) => Some(vec![q]),
            Some(ModelValue::Approx(..)) => None,
            None => Some(vec![BigRational::zero(), BigRational::one()]),
        },
        Sexp::List(items) => {
            let (Sexp::Atom(op), args) = items.split_first()? else { return None };
            let args: Vec<Vec<BigRational>> = args.iter().map(univariate).collect::<Option<_>>()?;
            match (op.as_str(), args.len()) {
                ("-", 1) => Some(args[0].iter().map(|x| -x).collect()),
                ("-", _) => {
                    let mut it = args.into_iter();
                    let first = it.next()?;
                    Some(it.fold(first, |acc, b| add(acc, b.into_iter().map(|x| -x).collect())))
                }
                ("+", _) => args.into_iter().reduce(add),
                ("*", _) => args.into_iter().reduce(|a, b| mul(&a, &b)),
                ("/", 2) if args[1].len() == 1 && !args[1][0].is_zero() => {
                    Some(args[0].iter().map(|x| x / &args[1][0]).collect())
                }
                ("^", 2) => {
                    let k = args[1].first()?.to_integer().to_u32()?;
                    let mut out = vec![BigRational::one()];
                    for _ in 0..k {
                        out = mul(&out, &args[0]);
                    }
                    Some(out)
                }
                _ => None,
            }
        }
    }
}

/// The `k`-th (1-based, increasing) real root, by bisection between
/// sign changes on a fine grid within the Cauchy bound.
fn real_root(coeffs: &[BigRational], k: usize) -> Option<f64> {
    let c: Vec<f64> = coeffs.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect();
    let deg = c.iter().rposition(|x| *x != 0.0)?;
    if deg == 0 {
        return None;
    }
    let lead = c[deg].abs();
    let bound = 1.0 + c[..deg].iter().map(|x| x.abs() / lead).fold(0.0, f64::max);
    let f = |x: f64| c.iter().rev().fold(0.0, |acc, a| acc * x + a);
    let steps = 20_000;
    let mut roots = Vec::new();
    let mut prev = -bound;
    let mut fp = f(prev);
    for i in 1..=steps {
        let x = -bound + 2.0 * bound * i as f64 / steps as f64;
        let fx = f(x);
        if fp == 0.0 {
            roots.push(prev);
        } else if fp.signum() != fx.signum() && fx != 0.0 {
            let (mut a, mut b) = (prev, x);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if f(m).signum() == fp.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = x;
        fp = fx;
    }
    roots.get(k.checked_sub(1)?).copied()
}

fn value(e: &Sexp) -> Result<ModelValue, ExternalError> {
    let bad = || ExternalError::Malformed(format!("unsupported model value {e:?}"));
    match e {
        Sexp::Atom(s) => numeral(s).ok_or_else(bad),
        Sexp::List(items) => {
            let (Sexp::Atom(op), args) = items.split_first().ok_or_else(bad)? else { return Err(bad()) };
            match (op.as_str(), args) {
                ("-", [a]) => Ok(match value(a)? {
                    ModelValue::Exact(q) => ModelValue::Exact(-q),
                    ModelValue::Approx(x, t) => ModelValue::Approx(-x, format!("(- {t})")),
                }),
                ("/", [a, b]) => match (value(a)?, value(b)?) {
                    (ModelValue::Exact(p), ModelValue::Exact(q)) if !q.is_zero() => Ok(ModelValue::Exact(p / q)),
                    (p, q) => Ok(ModelValue::Approx(p.to_f64() / q.to_f64(), format!("{e:?}"))),
                },
                ("root-obj", [p, Sexp::Atom(k)]) => {
                    let coeffs = univariate(p).ok_or_else(bad)?;
                    let k: usize = k.parse().map_err(|_| bad())?;
                    let x = real_root(&coeffs, k).ok_or_else(bad)?;
                    Ok(ModelValue::Approx(x, print_sexp(e)))
                }
                _ => Err(bad()),
            }
        }
    }
}

fn print_sexp(e: &Sexp) -> String {
    match e {
        Sexp::Atom(s) => s.clone(),
        Sexp::List(items) => format!("({})", items.iter().map(print_sexp).collect::<Vec<_>>().join(" ")),
    }
}

fn define_funs(items: &[Sexp], out: &mut Vec<(String, ModelValue)>) -> Result<(), ExternalError> {
    for it in items {
        match it {
            Sexp::Atom(a) if a == "model" => {}
            Sexp::List(parts) => match parts.as_slice() {
                [Sexp::Atom(d), Sexp::Atom(name), Sexp::List(params), _sort, body] if d == "define-fun" => {
                    if params.is_empty() {
                        out.push((name.clone(), value(body)?));
                    }
                }
                _ => return Err(ExternalError::Malformed(format!("unexpected model entry {}", print_sexp(it)))),
            },
            _ => return Err(ExternalError::Malformed(format!("unexpected model entry {}", print_sexp(it)))),
        }
    }
    Ok(())
}

/// Parse a solver's standard output.
pub fn parse_solver_response(text: &str) -> Result<SolverResponse, ExternalError> {
    let items = parse_sexps(text)?;
    let mut it = items
        .iter()
        .filter(|e| !matches!(e, Sexp::List(l) if matches!(l.first(), Some(Sexp::Atom(a)) if a == "error")));
    let status = match it.next() {
        Some(Sexp::Atom(s)) => s.as_str(),
        Some(e) => return Err(ExternalError::Malformed(format!("expected a status, got {}", print_sexp(e)))),
        None => return Err(ExternalError::Malformed("empty response".into())),
    };
    match status {
        "unsat" => Ok(SolverResponse::Unsat),
        "unknown" => Ok(SolverResponse::Unknown("solver answered unknown".into())),
        "sat" => {
            let mut model = Vec::new();
            if let Some(m) = it.next() {
                let Sexp::List(entries) = m else {
                    return Err(ExternalError::Malformed(format!("expected a model, got {}", print_sexp(m))));
                };
                define_funs(entries, &mut model)?;
            }
            if let Some(extra) = it.next() {
                return Err(ExternalError::Malformed(format!("trailing output {}", print_sexp(extra))));
            }
            Ok(SolverResponse::Sat(model))
        }
        other => Err(ExternalError::Malformed(format!("unknown status {other:?}"))),
    }
}

/// Write `smt` to a temporary file and run the configured solver on it.
pub fn run_external(smt: &str, cfg: &SolverConfig) -> Result<SolverResponse, ExternalError> {
    let mut parts = cfg.command.split_whitespace();
    let prog = parts.next().ok_or_else(|| ExternalError::Config("empty solver command".into()))?;
    let mut file = tempfile::Builder::new()
        .prefix("causat-")
        .suffix(".smt2")
        .tempfile()
        .map_err(|e| ExternalError::Io(e.to_string()))?;
    file.write_all(smt.as_bytes()).map_err(|e| ExternalError::Io(e.to_string()))?;
    file.flush().map_err(|e| ExternalError::Io(e.to_string()))?;
    let mut child = Command::new(prog)
        .args(parts)
        .arg(file.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| ExternalError::Launch(format!("{prog}: {e}")))?;
    let mut stdout = child.stdout.take().unwrap();
    let mut stderr = child.stderr.take().unwrap();
    let out = std::thread::spawn(move || {
        let mut s = String::new();
        stdout.read_to_string(&mut s).map(|_| s)
    });
    let err = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });
    let status =
        child.wait_timeout(Duration::from_millis(cfg.timeout_ms)).map_err(|e| ExternalError::Io(e.to_string()))?;
    if status.is_none() {
        let _ = child.kill();
        let _ = child.wait();
        return Err(ExternalError::Timeout(cfg.timeout_ms));
    }
    let text = out.join().expect("reader thread").map_err(|e| ExternalError::Io(e.to_string()))?;
    let errtext = err.join().expect("reader thread");
    parse_solver_response(&text).map_err(|e| match e {
        ExternalError::Malformed(m) if !errtext.trim().is_empty() => {
            ExternalError::Malformed(format!("{m}; stderr: {}", errtext.trim()))
        }
        e => e,
    })
}

/// Decides formulas through an outside solver on their polynomial system.
#[derive(Clone, Debug)]
pub struct ExternalSolver {
    pub config: SolverConfig,
}

impl ProbSolver for ExternalSolver {
    fn name(&self) -> &str {
        "external"
    }

    fn solve_prob(&self, sig: &Signature, psi: &ProbFormula) -> Result<ProbOutcome, SolverError> {
        let sys = build_etr(sig, psi)?;
        let model = match run_external(&emit_smtlib(&sys), &self.config)? {
            SolverResponse::Unsat => return Ok(ProbOutcome::Unsat),
            SolverResponse::Unknown(why) => return Ok(ProbOutcome::Unknown(why)),
            SolverResponse::Sat(model) => model,
        };
        let lookup = |name: &str| model.iter().find(|(n, _)| n == name).map(|(_, v)| v);
        let exact: Option<Vec<BigRational>> = sys
            .vars
            .iter()
            .map(|v| match lookup(&v.name) {
                Some(ModelValue::Exact(q)) => Some(q.clone()),
                Some(ModelValue::Approx(..)) => None,
                None => Some(BigRational::zero()),
            })
            .collect();
        let approx: Vec<f64> = sys.vars.iter().map(|v| lookup(&v.name).map_or(0.0, ModelValue::to_f64)).collect();
        let mut tries = Vec::new();
        if let Some(x) = exact {
            tries.push(x);
        } else {
            for eps in [1e-12, 1e-9, 1e-6] {
                tries.push(round_point(&sys, &approx, eps));
            }
        }
        for x in &tries {
            if sys.holds(x) {
                if let Some(m) = sys.measure(x) {
                    if matches!(m.satisfies(sig, psi), Ok(true)) {
                        return Ok(ProbOutcome::Sat(m));
                    }
                }
            }
        }
        Ok(ProbOutcome::Unknown(format!("solver model has no exact rational form: {}", sys.describe(sig, &approx))))
    }

    fn complete_for(&self, _: &ProbFormula) -> bool {
        true
    }
}
