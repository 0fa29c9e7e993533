//! From causal to purely probabilistic satisfiability.
//!
//! A certificate is a variable order together with a few state
//! descriptions compatible with it. Given one, each event `e` of a causal
//! formula is replaced by the disjunction of fresh, mutually exclusive
//! atoms `W = k` standing for the descriptions that entail `e`; the
//! result is satisfiable exactly when some measure on those descriptions
//! satisfies the original formula, and any such measure is realized by a
//! model built from the order.
//!
//! [`decide_causal_sat`] searches certificates. By default it takes, per
//! order, every compatible description at once: a measure on a subset is
//! also a measure on the whole set, so one call per order settles it, and
//! a satisfying measure is then thinned to few descriptions by exact
//! Caratheodory reduction before the certificate is formed.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::lang::{
    classify, print_event, print_formula, print_signature, FullFormula, Intervention, ProbFormula, PropFormula,
    Signature, Term, ValId, VarDecl, VarId,
};
use crate::scm::{EvalError, Scm, VariableOrder};
use crate::solver::{ProbOutcome, ProbSolver, SolverError};
use crate::statedesc::{
    build_context, check_compatibility, compatible_descriptions, entails, model_from_measure, DeltaContext,
    MeasureError, StateDescription,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub ord: VariableOrder,
    pub descriptions: Vec<StateDescription>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertificateError {
    #[error("certificate has no descriptions")]
    Empty,
    #[error("certificate has {found} descriptions, more than the formula size {bound}")]
    TooLarge { found: usize, bound: usize },
    #[error("description #{0} is not over the formula's context")]
    Membership(usize),
    #[error("description #{0} is listed twice")]
    Duplicate(usize),
    #[error("order does not enumerate the formula's variables")]
    Order,
    #[error("description #{0} fails the compatibility check")]
    Incompatible(usize),
}

/// Check membership, size and compatibility against `phi`.
pub fn validate(sig: &Signature, phi: &ProbFormula, cert: &Certificate) -> Result<Arc<DeltaContext>, CertificateError> {
    let ctx = Arc::new(build_context(sig, phi));
    validate_in(&ctx, phi.size(), cert)?;
    Ok(ctx)
}

fn validate_in(ctx: &Arc<DeltaContext>, bound: usize, cert: &Certificate) -> Result<(), CertificateError> {
    if cert.descriptions.is_empty() {
        return Err(CertificateError::Empty);
    }
    if cert.descriptions.len() > bound {
        return Err(CertificateError::TooLarge { found: cert.descriptions.len(), bound });
    }
    let vars: BTreeSet<VarId> = ctx.vars().iter().copied().collect();
    if !cert.ord.enumerates(&vars) {
        return Err(CertificateError::Order);
    }
    let mut seen = BTreeSet::new();
    for (k, d) in cert.descriptions.iter().enumerate() {
        if **d.context() != **ctx {
            return Err(CertificateError::Membership(k));
        }
        if !seen.insert(d.table()) {
            return Err(CertificateError::Duplicate(k));
        }
        match check_compatibility(d, &cert.ord) {
            Ok(v) if v.is_compatible() => {}
            _ => return Err(CertificateError::Incompatible(k)),
        }
    }
    Ok(())
}

/// Name of the fresh variable of reduced formulas.
pub const FRESH_NAME: &str = "W";

#[derive(Clone, Debug)]
pub struct ReductionResult {
    /// Signature with the single fresh variable `W`.
    pub sig: Signature,
    pub psi: ProbFormula,
    /// `W = k` stands for `dictionary[k]`.
    pub dictionary: Vec<StateDescription>,
    /// The value of `W` no description maps to.
    pub none: ValId,
}

impl ReductionResult {
    pub fn w(&self) -> VarId {
        0
    }

    /// `P(W = none) = 0`, which pins all mass onto the dictionary.
    pub fn no_spare_mass(&self) -> ProbFormula {
        let contradiction = Term::prob(FullFormula::bare(PropFormula::contradiction(0, 0, 1)));
        ProbFormula::geq(contradiction, Term::prob(FullFormula::bare(PropFormula::assign(0, self.none))))
    }
}

/// The reduction for a validated certificate.
pub fn reduce_with_certificate(
    sig: &Signature,
    phi: &ProbFormula,
    cert: &Certificate,
) -> Result<ReductionResult, CertificateError> {
    validate(sig, phi, cert)?;
    Ok(substitute(phi, &cert.descriptions))
}

fn substitute(phi: &ProbFormula, dictionary: &[StateDescription]) -> ReductionResult {
    let n = dictionary.len();
    let domain: Vec<String> = (0..=n).map(|k| k.to_string()).collect();
    let sig = Signature::new(vec![VarDecl { name: FRESH_NAME.into(), domain }]).expect("one variable");
    let psi = phi.map_events(&mut |e| {
        let hits: Vec<usize> =
            (0..n).filter(|&k| entails(&dictionary[k], e).expect("description covers the formula")).collect();
        let prop = hits
            .into_iter()
            .map(|k| PropFormula::assign(0, k))
            .reduce(PropFormula::or)
            .unwrap_or_else(|| PropFormula::contradiction(0, 0, 1));
        FullFormula::bare(prop)
    });
    ReductionResult { sig, psi, dictionary: dictionary.to_vec(), none: n }
}

/// Text form: order, dictionary and the reduced formula.
pub fn trace(sig: &Signature, cert: &Certificate, r: &ReductionResult) -> String {
    let order: Vec<&str> = cert.ord.vars().iter().map(|&v| sig.var_name(v)).collect();
    let mut out = format!("order: {}\n", order.join(" < "));
    for (k, d) in r.dictionary.iter().enumerate() {
        out.push_str(&format!("{FRESH_NAME}={k} := {}\n", print_event(sig, &d.to_formula())));
    }
    out.push_str(&format!("{FRESH_NAME}={} := none\n", r.none));
    out.push_str(&print_signature(&r.sig));
    out.push('\n');
    out.push_str(&print_formula(&r.sig, &r.psi));
    out.push('\n');
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum StreamStop {
    #[error("certificate budget exhausted")]
    BudgetExhausted,
    #[error("more than {0} compatible descriptions under one order")]
    TooManyDescriptions(usize),
}

/// Certificates in order: variable orders outer, then description
/// subsets by increasing size, each size in lexicographic order.
pub struct CertificateStream {
    ctx: Arc<DeltaContext>,
    orders: Vec<VariableOrder>,
    next_order: usize,
    current: Option<(VariableOrder, Vec<StateDescription>)>,
    comb: Vec<usize>,
    max_size: usize,
    remaining: usize,
    limit: usize,
    done: bool,
}

/// Stream of candidate certificates for `phi`, at most `budget` of them.
pub fn enumerate_certificates(sig: &Signature, phi: &ProbFormula, budget: usize, limit: usize) -> CertificateStream {
    let ctx = Arc::new(build_context(sig, phi));
    let orders = VariableOrder::all(ctx.vars());
    CertificateStream {
        ctx,
        orders,
        next_order: 0,
        current: None,
        comb: Vec::new(),
        max_size: phi.size(),
        remaining: budget,
        limit,
        done: false,
    }
}

impl CertificateStream {
    pub fn context(&self) -> &Arc<DeltaContext> {
        &self.ctx
    }

    fn advance(&mut self) {
        let len = self.current.as_ref().map_or(0, |c| c.1.len());
        let k = self.comb.len();
        // next k-subset in lexicographic order
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.comb[i] < len - k + i {
                self.comb[i] += 1;
                for j in i + 1..k {
                    self.comb[j] = self.comb[j - 1] + 1;
                }
                return;
            }
        }
        if k < self.max_size.min(len) {
            self.comb = (0..k + 1).collect();
        } else {
            self.current = None;
        }
    }
}

impl Iterator for CertificateStream {
    type Item = Result<Certificate, StreamStop>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        while self.current.is_none() {
            let Some(ord) = self.orders.get(self.next_order).cloned() else {
                self.done = true;
                return None;
            };
            self.next_order += 1;
            match compatible_descriptions(&self.ctx, &ord, self.limit).expect("orders enumerate the context") {
                Ok(ds) if !ds.is_empty() && self.max_size > 0 => {
                    self.current = Some((ord, ds));
                    self.comb = vec![0];
                }
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(StreamStop::TooManyDescriptions(e.0)));
                }
            }
        }
        if self.remaining == 0 {
            self.done = true;
            return Some(Err(StreamStop::BudgetExhausted));
        }
        self.remaining -= 1;
        let (ord, ds) = self.current.as_ref().unwrap();
        let cert = Certificate { ord: ord.clone(), descriptions: self.comb.iter().map(|&i| ds[i].clone()).collect() };
        self.advance();
        Some(Ok(cert))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// One solver call per order on all compatible descriptions.
    #[default]
    Saturate,
    /// One solver call per certificate of the stream.
    Enumerate,
}

#[derive(Clone, Debug)]
pub struct DecideConfig {
    /// Most solver calls allowed.
    pub budget: usize,
    pub mode: Mode,
    /// Most compatible descriptions materialized under one order.
    pub description_limit: usize,
}

impl Default for DecideConfig {
    fn default() -> Self {
        DecideConfig { budget: 100_000, mode: Mode::Saturate, description_limit: 200_000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DecideStats {
    pub orders: usize,
    pub solver_calls: usize,
    /// Descriptions handed to the solver, summed over calls.
    pub descriptions: usize,
}

#[derive(Clone, Debug)]
pub struct SatWitness {
    pub model: Scm,
    /// Absent for purely probabilistic formulas.
    pub certificate: Option<Certificate>,
    pub reduction: Option<ReductionResult>,
    /// The measure behind the model, on the certificate's descriptions.
    pub measure: Vec<(StateDescription, BigRational)>,
}

#[derive(Clone, Debug)]
pub enum Decision {
    Sat(Box<SatWitness>, DecideStats),
    Unsat(DecideStats),
    Unknown { reason: String, stats: DecideStats },
}

impl Decision {
    pub fn stats(&self) -> &DecideStats {
        match self {
            Decision::Sat(_, s) | Decision::Unsat(s) => s,
            Decision::Unknown { stats, .. } => stats,
        }
    }
}

#[derive(Debug, Error)]
pub enum DecideError {
    #[error("{0}")]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Certificate(#[from] CertificateError),
    #[error("{0}")]
    Measure(#[from] MeasureError),
    #[error("{0}")]
    Eval(#[from] EvalError),
    #[error("internal error: witness fails the formula: {0}")]
    WitnessRejected(String),
}

/// Thin a measure to linearly independent entailment vectors over
/// `events`, keeping every event's probability.
pub fn caratheodory(
    mut mu: Vec<(StateDescription, BigRational)>,
    events: &[FullFormula],
) -> Vec<(StateDescription, BigRational)> {
    mu.retain(|(_, w)| !w.is_zero());
    loop {
        let m = mu.len();
        // rows: one per event plus total mass; columns: support points
        let mut a: Vec<Vec<BigRational>> = events
            .iter()
            .map(|e| {
                mu.iter()
                    .map(|(d, _)| {
                        if entails(d, e).unwrap_or(false) {
                            BigRational::from_integer(1.into())
                        } else {
                            BigRational::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        a.push(vec![BigRational::from_integer(1.into()); m]);
        let Some(d) = null_vector(a, m) else { return mu };
        let t = mu
            .iter()
            .zip(&d)
            .filter(|(_, di)| di.is_negative())
            .map(|((_, w), di)| w / -di)
            .min()
            .expect("null vector of a column-sum row has a negative entry");
        for ((_, w), di) in mu.iter_mut().zip(&d) {
            *w += &t * di;
        }
        mu.retain(|(_, w)| !w.is_zero());
    }
}

/// A nonzero `d` with `a d = 0`, if the columns are dependent.
fn null_vector(mut a: Vec<Vec<BigRational>>, m: usize) -> Option<Vec<BigRational>> {
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut r = 0;
    for c in 0..m {
        let Some(p) = (r..a.len()).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, p);
        let inv = BigRational::from_integer(1.into()) / &a[r][c];
        for x in a[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..a.len() {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                let pivot = a[r].clone();
                for (x, p) in a[i].iter_mut().zip(&pivot) {
                    *x -= &f * p;
                }
            }
        }
        pivots.push((r, c));
        r += 1;
    }
    let free = (0..m).find(|c| !pivots.iter().any(|p| p.1 == *c))?;
    let mut d = vec![BigRational::zero(); m];
    d[free] = BigRational::from_integer(1.into());
    for &(row, c) in &pivots {
        d[c] = -a[row][free].clone();
    }
    Some(d)
}

/// Events whose probabilities fix every term of `phi`: each `P(e)`
/// event, and `e and g` with `g` for each `P(e | g)`.
fn term_events(phi: &ProbFormula) -> Vec<FullFormula> {
    let mut out = BTreeSet::new();
    phi.visit_terms(&mut |t| {
        let mut stack = vec![t];
        while let Some(t) = stack.pop() {
            match t {
                Term::Prob(e) => {
                    out.insert(e.clone());
                }
                Term::CondProb(e, g) => {
                    out.insert(FullFormula::and(e.clone(), g.clone()));
                    out.insert(g.clone());
                }
                Term::Sum(a, b) | Term::Product(a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
                Term::Const(_) => {}
            }
        }
    });
    out.into_iter().collect()
}

/// Read a measure on `W` back onto the dictionary.
fn pull_back(
    r: &ReductionResult,
    m: &crate::solver::Measure,
) -> Result<Vec<(StateDescription, BigRational)>, DecideError> {
    let top = m.ctx.intervention_index(&Intervention::trivial()).expect("contexts hold the trivial intervention");
    let col = m.ctx.var_index(r.w()).expect("W is mentioned");
    let mut mu: Vec<(StateDescription, BigRational)> = Vec::new();
    for (d, w) in &m.weights {
        if w.is_zero() {
            continue;
        }
        let k = d.value(top, col);
        if k == r.none {
            return Err(DecideError::WitnessRejected("solver put mass outside the dictionary".into()));
        }
        let desc = &r.dictionary[k];
        match mu.iter_mut().find(|(x, _)| x == desc) {
            Some((_, acc)) => *acc += w,
            None => mu.push((desc.clone(), w.clone())),
        }
    }
    Ok(mu)
}

fn witness(
    sig: &Signature,
    phi: &ProbFormula,
    ctx: &Arc<DeltaContext>,
    ord: VariableOrder,
    mu: Vec<(StateDescription, BigRational)>,
) -> Result<SatWitness, DecideError> {
    let cert = Certificate { ord, descriptions: mu.iter().map(|(d, _)| d.clone()).collect() };
    validate_in(ctx, phi.size(), &cert)?;
    let reduction = substitute(phi, &cert.descriptions);
    let model = model_from_measure(sig, ctx, &cert.ord, &mu)?;
    if !model.model_check(phi)? {
        return Err(DecideError::WitnessRejected("reconstructed model does not satisfy the formula".into()));
    }
    Ok(SatWitness { model, certificate: Some(cert), reduction: Some(reduction), measure: mu })
}

/// Decide satisfiability of `phi` with `solver` for the probabilistic
/// subproblems. `Unsat` is returned only when the search was exhaustive
/// and the solver is complete for the formula's fragment.
pub fn decide_causal_sat(
    sig: &Signature,
    phi: &ProbFormula,
    solver: &dyn ProbSolver,
    cfg: &DecideConfig,
) -> Result<Decision, DecideError> {
    let fragment = classify(phi);
    let mut stats = DecideStats::default();
    let complete = solver.complete_for(phi);
    if !fragment.causal {
        if cfg.budget == 0 {
            return Ok(Decision::Unknown { reason: "solver budget exhausted".into(), stats });
        }
        stats.solver_calls = 1;
        return Ok(match solver.solve_prob(sig, phi)? {
            ProbOutcome::Sat(m) => {
                let ord = VariableOrder::new(m.ctx.vars().to_vec());
                let model = model_from_measure(sig, &m.ctx, &ord, &m.weights)?;
                if !model.model_check(phi)? {
                    return Err(DecideError::WitnessRejected("solver measure does not satisfy the formula".into()));
                }
                let w = SatWitness { model, certificate: None, reduction: None, measure: m.weights };
                Decision::Sat(Box::new(w), stats)
            }
            ProbOutcome::Unsat if complete => Decision::Unsat(stats),
            ProbOutcome::Unsat => {
                Decision::Unknown { reason: format!("{} is not complete for this fragment", solver.name()), stats }
            }
            ProbOutcome::Unknown(reason) => Decision::Unknown { reason, stats },
        });
    }
    match cfg.mode {
        Mode::Saturate => saturate(sig, phi, solver, cfg, complete, stats),
        Mode::Enumerate => enumerate(sig, phi, solver, cfg, complete, stats),
    }
}

fn saturate(
    sig: &Signature,
    phi: &ProbFormula,
    solver: &dyn ProbSolver,
    cfg: &DecideConfig,
    complete: bool,
    mut stats: DecideStats,
) -> Result<Decision, DecideError> {
    let ctx = Arc::new(build_context(sig, phi));
    let events = term_events(phi);
    let mut unknown: Option<String> = None;
    let mut seen: BTreeSet<Vec<StateDescription>> = BTreeSet::new();
    for ord in VariableOrder::all(ctx.vars()) {
        stats.orders += 1;
        let ds = match compatible_descriptions(&ctx, &ord, cfg.description_limit).expect("orders enumerate the context")
        {
            Ok(ds) => ds,
            Err(e) => {
                unknown.get_or_insert_with(|| e.to_string());
                continue;
            }
        };
        // orders with the same compatible set share the verdict
        let mut key = ds.clone();
        key.sort();
        if ds.is_empty() || !seen.insert(key) {
            continue;
        }
        if stats.solver_calls >= cfg.budget {
            return Ok(Decision::Unknown { reason: "solver budget exhausted".into(), stats });
        }
        stats.solver_calls += 1;
        stats.descriptions += ds.len();
        let r = substitute(phi, &ds);
        let psi = ProbFormula::and(r.psi.clone(), r.no_spare_mass());
        match solver.solve_prob(&r.sig, &psi)? {
            ProbOutcome::Sat(m) => {
                let mu = caratheodory(pull_back(&r, &m)?, &events);
                return Ok(Decision::Sat(Box::new(witness(sig, phi, &ctx, ord, mu)?), stats));
            }
            ProbOutcome::Unsat => {}
            ProbOutcome::Unknown(reason) => {
                unknown.get_or_insert(reason);
            }
        }
    }
    Ok(match unknown {
        Some(reason) => Decision::Unknown { reason, stats },
        None if complete => Decision::Unsat(stats),
        None => Decision::Unknown { reason: format!("{} is not complete for this fragment", solver.name()), stats },
    })
}

fn enumerate(
    sig: &Signature,
    phi: &ProbFormula,
    solver: &dyn ProbSolver,
    cfg: &DecideConfig,
    complete: bool,
    mut stats: DecideStats,
) -> Result<Decision, DecideError> {
    let stream = enumerate_certificates(sig, phi, cfg.budget, cfg.description_limit);
    let ctx = stream.context().clone();
    let mut unknown: Option<String> = None;
    let mut last: Option<VariableOrder> = None;
    for item in stream {
        let cert = match item {
            Ok(c) => c,
            Err(stop) => return Ok(Decision::Unknown { reason: stop.to_string(), stats }),
        };
        if last.as_ref() != Some(&cert.ord) {
            stats.orders += 1;
            last = Some(cert.ord.clone());
        }
        stats.solver_calls += 1;
        stats.descriptions += cert.descriptions.len();
        let r = substitute(phi, &cert.descriptions);
        let psi = ProbFormula::and(r.psi.clone(), r.no_spare_mass());
        match solver.solve_prob(&r.sig, &psi)? {
            ProbOutcome::Sat(m) => {
                let mu = pull_back(&r, &m)?;
                return Ok(Decision::Sat(Box::new(witness(sig, phi, &ctx, cert.ord, mu)?), stats));
            }
            ProbOutcome::Unsat => {}
            ProbOutcome::Unknown(reason) => {
                unknown.get_or_insert(reason);
            }
        }
    }
    Ok(match unknown {
        Some(reason) => Decision::Unknown { reason, stats },
        None if complete => Decision::Unsat(stats),
        None => Decision::Unknown { reason: format!("{} is not complete for this fragment", solver.name()), stats },
    })
}
