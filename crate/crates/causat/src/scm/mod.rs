//! Finite structural causal models with explicit function tables.
//!
//! Every structural function `f_V` is a dense table over the values of all
//! other endogenous variables together with one full exogenous assignment.
//! Probabilities are exact rationals.

mod json;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::lang::{FullFormula, Intervention, ProbFormula, Signature, SignatureError, Term, ValId, VarDecl, VarId};

pub use json::JsonError;

/// Default bound on the number of variables `influences` will range over.
pub const DEFAULT_SCOPE_CAP: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScmError {
    #[error("{0}")]
    Signature(#[from] SignatureError),
    #[error("exogenous weights sum to {0}, not 1")]
    WeightSum(BigRational),
    #[error("negative weight {0}")]
    NegativeWeight(BigRational),
    #[error("exogenous assignment has {found} entries, expected {expected}")]
    ExoArity { expected: usize, found: usize },
    #[error("exogenous value index {value} out of range for `{var}`")]
    ExoValue { var: String, value: usize },
    #[error("exogenous assignment listed twice in the distribution")]
    DuplicateExo,
    #[error("expected {expected} function tables, found {found}")]
    TableCount { expected: usize, found: usize },
    #[error("table for `{var}` has {found} entries, expected {expected}")]
    TableSize { var: String, expected: usize, found: usize },
    #[error("table for `{var}` outputs value index {value}, outside its domain")]
    TableValue { var: String, value: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("structural equations did not reach a fixpoint within {0} passes")]
    NonConvergence(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InfluenceError {
    #[error("influence scope of {size} variables exceeds the cap of {cap}")]
    ScopeTooLarge { size: usize, cap: usize },
    #[error("{0}")]
    Eval(#[from] EvalError),
}

/// Strict total order on endogenous variables, listed from least to greatest.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VariableOrder {
    vars: Vec<VarId>,
}

impl VariableOrder {
    pub fn new(vars: Vec<VarId>) -> Self {
        VariableOrder { vars }
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn rank(&self, v: VarId) -> Option<usize> {
        self.vars.iter().position(|&w| w == v)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// True when the order lists exactly the given variables once each.
    pub fn enumerates(&self, vars: &BTreeSet<VarId>) -> bool {
        self.vars.len() == vars.len() && self.vars.iter().collect::<BTreeSet<_>>() == vars.iter().collect()
    }

    /// All orderings of `vars` in lexicographic order of positions.
    pub fn all(vars: &[VarId]) -> Vec<VariableOrder> {
        let mut out = Vec::new();
        let mut idx: Vec<usize> = (0..vars.len()).collect();
        loop {
            out.push(VariableOrder::new(idx.iter().map(|&i| vars[i]).collect()));
            // next permutation
            let Some(k) = (1..idx.len()).rev().find(|&k| idx[k - 1] < idx[k]) else { break };
            let l = (k..idx.len()).rev().find(|&l| idx[l] > idx[k - 1]).unwrap();
            idx.swap(k - 1, l);
            idx[k..].reverse();
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Table {
    Const(ValId),
    /// Indexed by the other endogenous values in signature order, then the
    /// exogenous assignment index.
    Dense(Vec<ValId>),
}

/// Influence pairs `(i, j)` meaning `V_i` influences `V_j`.
pub type InfluenceRelation = BTreeSet<(VarId, VarId)>;

#[derive(Clone, Debug)]
pub struct Scm {
    sig: Signature,
    exo: Vec<VarDecl>,
    exo_space: usize,
    /// Support of the exogenous distribution as (assignment index, weight).
    dist: Vec<(usize, BigRational)>,
    tables: Vec<Arc<Table>>,
}

impl Scm {
    /// Build from explicit tables. Zero weights are dropped from the support.
    pub fn new(
        sig: Signature,
        exo: Vec<VarDecl>,
        dist: Vec<(Vec<ValId>, BigRational)>,
        tables: Vec<Table>,
    ) -> Result<Scm, ScmError> {
        Signature::new(exo.clone())?;
        let exo_space = exo.iter().map(|d| d.domain.len()).product::<usize>();
        let mut seen = BTreeSet::new();
        let mut support = Vec::new();
        let mut total = BigRational::zero();
        for (u, w) in dist {
            if u.len() != exo.len() {
                return Err(ScmError::ExoArity { expected: exo.len(), found: u.len() });
            }
            for (d, &x) in exo.iter().zip(&u) {
                if x >= d.domain.len() {
                    return Err(ScmError::ExoValue { var: d.name.clone(), value: x });
                }
            }
            if w < BigRational::zero() {
                return Err(ScmError::NegativeWeight(w));
            }
            let idx = encode(&u, exo.iter().map(|d| d.domain.len()));
            if !seen.insert(idx) {
                return Err(ScmError::DuplicateExo);
            }
            total += &w;
            if !w.is_zero() {
                support.push((idx, w));
            }
        }
        if !total.is_one() {
            return Err(ScmError::WeightSum(total));
        }
        support.sort_by_key(|p| p.0);
        if tables.len() != sig.len() {
            return Err(ScmError::TableCount { expected: sig.len(), found: tables.len() });
        }
        let m = Scm { sig, exo, exo_space, dist: support, tables: tables.into_iter().map(Arc::new).collect() };
        for v in 0..m.sig.len() {
            let size = m.table_size(v);
            let dom = m.sig.domain_size(v);
            let name = || m.sig.var_name(v).to_string();
            match m.tables[v].as_ref() {
                Table::Const(x) if *x >= dom => return Err(ScmError::TableValue { var: name(), value: *x }),
                Table::Const(_) => {}
                Table::Dense(t) => {
                    if t.len() != size {
                        return Err(ScmError::TableSize { var: name(), expected: size, found: t.len() });
                    }
                    if let Some(&x) = t.iter().find(|&&x| x >= dom) {
                        return Err(ScmError::TableValue { var: name(), value: x });
                    }
                }
            }
        }
        Ok(m)
    }

    /// Build dense tables by calling `f(v, endo, exo)` on every input, where
    /// `endo` is a full endogenous assignment whose own slot for `v` is 0.
    pub fn from_fn(
        sig: Signature,
        exo: Vec<VarDecl>,
        dist: Vec<(Vec<ValId>, BigRational)>,
        f: impl Fn(VarId, &[ValId], &[ValId]) -> ValId,
    ) -> Result<Scm, ScmError> {
        let exo_sizes: Vec<usize> = exo.iter().map(|d| d.domain.len()).collect();
        let exo_space: usize = exo_sizes.iter().product();
        let mut tables = Vec::with_capacity(sig.len());
        for v in 0..sig.len() {
            let others: Vec<VarId> = (0..sig.len()).filter(|&w| w != v).collect();
            let other_space: usize = others.iter().map(|&w| sig.domain_size(w)).product();
            let mut t = Vec::with_capacity(other_space * exo_space);
            let mut endo = vec![0; sig.len()];
            for o in 0..other_space {
                decode_into(o, others.iter().map(|&w| sig.domain_size(w)), &mut |k, x| endo[others[k]] = x);
                for u in 0..exo_space {
                    let uv = decode(u, &exo_sizes);
                    t.push(f(v, &endo, &uv));
                }
            }
            tables.push(Table::Dense(t));
        }
        Scm::new(sig, exo, dist, tables)
    }

    pub fn sig(&self) -> &Signature {
        &self.sig
    }

    pub fn exo(&self) -> &[VarDecl] {
        &self.exo
    }

    pub fn exo_space(&self) -> usize {
        self.exo_space
    }

    pub fn table(&self, v: VarId) -> &Table {
        &self.tables[v]
    }

    /// Support points as (exogenous assignment, weight).
    pub fn support(&self) -> impl Iterator<Item = (Vec<ValId>, &BigRational)> + '_ {
        self.dist.iter().map(|(u, w)| (self.decode_exo(*u), w))
    }

    pub fn decode_exo(&self, u: usize) -> Vec<ValId> {
        decode(u, &self.exo.iter().map(|d| d.domain.len()).collect::<Vec<_>>())
    }

    pub fn encode_exo(&self, u: &[ValId]) -> usize {
        encode(u, self.exo.iter().map(|d| d.domain.len()))
    }

    fn table_size(&self, v: VarId) -> usize {
        (0..self.sig.len()).filter(|&w| w != v).map(|w| self.sig.domain_size(w)).product::<usize>() * self.exo_space
    }

    fn index(&self, v: VarId, endo: &[ValId], u: usize) -> usize {
        let mut idx = 0;
        for (w, &x) in endo.iter().enumerate() {
            if w != v {
                idx = idx * self.sig.domain_size(w) + x;
            }
        }
        idx * self.exo_space + u
    }

    /// Value of `f_v` on the given endogenous values (own slot ignored) and exogenous index.
    pub fn apply(&self, v: VarId, endo: &[ValId], u: usize) -> ValId {
        match self.tables[v].as_ref() {
            Table::Const(x) => *x,
            Table::Dense(t) => t[self.index(v, endo, u)],
        }
    }

    /// The model with `f_V` replaced by the constant `i(V)` for each `V` in `i`.
    pub fn apply_intervention(&self, i: &Intervention) -> Scm {
        let mut m = self.clone();
        for &(v, x) in i.pairs() {
            m.tables[v] = Arc::new(Table::Const(x));
        }
        m
    }

    /// Solve the equations of `i(M)` under exogenous index `u` by repeated
    /// passes in signature order, starting from all-zero values.
    pub fn solve(&self, u: usize, i: &Intervention) -> Result<Vec<ValId>, EvalError> {
        let n = self.sig.len();
        let mut state = vec![0; n];
        for &(v, x) in i.pairs() {
            state[v] = x;
        }
        let cap = n + 1;
        for _ in 0..cap {
            let mut changed = false;
            for v in 0..n {
                let x = match i.get(v) {
                    Some(x) => x,
                    None => self.apply(v, &state, u),
                };
                if x != state[v] {
                    state[v] = x;
                    changed = true;
                }
            }
            if !changed {
                return Ok(state);
            }
        }
        Err(EvalError::NonConvergence(cap))
    }

    /// Truth of `e` at exogenous assignment `u`.
    pub fn eval_event(&self, u: &[ValId], e: &FullFormula) -> Result<bool, EvalError> {
        let u = self.encode_exo(u);
        e.eval_with(&mut |i| self.solve(u, i))
    }

    pub fn evaluator(&self) -> Evaluator<'_> {
        Evaluator { m: self, cache: HashMap::new() }
    }

    pub fn prob(&self, e: &FullFormula) -> Result<BigRational, EvalError> {
        self.evaluator().prob(e)
    }

    pub fn term_value(&self, t: &Term) -> Result<BigRational, EvalError> {
        self.evaluator().term_value(t)
    }

    pub fn model_check(&self, phi: &ProbFormula) -> Result<bool, EvalError> {
        self.evaluator().model_check(phi)
    }

    /// True iff every `f_V` ignores the variables not below `V` in `ord`.
    /// Variables missing from `ord` make the answer false.
    pub fn is_recursive(&self, ord: &VariableOrder) -> bool {
        let all: BTreeSet<VarId> = (0..self.sig.len()).collect();
        if !ord.enumerates(&all) {
            return false;
        }
        (0..self.sig.len()).all(|v| {
            let rank = ord.rank(v).unwrap();
            let below: Vec<VarId> = ord.vars()[..rank].to_vec();
            self.depends_on(v).iter().all(|w| below.contains(w))
        })
    }

    /// Endogenous variables whose value can change the output of `f_v`.
    pub fn depends_on(&self, v: VarId) -> Vec<VarId> {
        (0..self.sig.len()).filter(|&w| w != v && self.dependence_witness(v, w).is_some()).collect()
    }

    /// An input where changing `w` alone changes `f_v`: (endo, exo index, other value of w).
    pub fn dependence_witness(&self, v: VarId, w: VarId) -> Option<(Vec<ValId>, usize, ValId)> {
        let Table::Dense(_) = self.tables[v].as_ref() else { return None };
        let n = self.sig.len();
        let others: Vec<VarId> = (0..n).filter(|&x| x != v).collect();
        let space: usize = others.iter().map(|&x| self.sig.domain_size(x)).product();
        let mut endo = vec![0; n];
        for o in 0..space {
            decode_into(o, others.iter().map(|&x| self.sig.domain_size(x)), &mut |k, x| endo[others[k]] = x);
            if endo[w] != 0 {
                continue;
            }
            for u in 0..self.exo_space {
                let base = self.apply(v, &endo, u);
                for alt in 1..self.sig.domain_size(w) {
                    let mut e2 = endo.clone();
                    e2[w] = alt;
                    if self.apply(v, &e2, u) != base {
                        return Some((endo.clone(), u, alt));
                    }
                }
            }
        }
        None
    }

    /// An order the model is recursive under, if one exists.
    pub fn find_order(&self) -> Result<VariableOrder, NonRecursive> {
        let n = self.sig.len();
        let deps: Vec<Vec<VarId>> = (0..n).map(|v| self.depends_on(v)).collect();
        let mut placed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let next = (0..n).find(|&v| !placed[v] && deps[v].iter().all(|&w| placed[w]));
            match next {
                Some(v) => {
                    placed[v] = true;
                    order.push(v);
                }
                None => {
                    let v = (0..n).find(|&v| !placed[v]).unwrap();
                    let w = *deps[v].iter().find(|&&w| !placed[w]).unwrap();
                    let (endo, u, alt) = self.dependence_witness(v, w).unwrap();
                    return Err(NonRecursive { var: v, input: w, endo, exo: self.decode_exo(u), alt });
                }
            }
        }
        Ok(VariableOrder::new(order))
    }

    /// Influence relation over interventions on `scope`, capped at `cap` variables.
    pub fn influences(&self, scope: &[VarId], cap: usize) -> Result<InfluenceRelation, InfluenceError> {
        if scope.len() > cap {
            return Err(InfluenceError::ScopeTooLarge { size: scope.len(), cap });
        }
        let n = self.sig.len();
        let mut rel = InfluenceRelation::new();
        let mut cache: HashMap<(usize, Intervention), Vec<ValId>> = HashMap::new();
        let mut solved = |u: usize, i: &Intervention| -> Result<Vec<ValId>, EvalError> {
            if let Some(s) = cache.get(&(u, i.clone())) {
                return Ok(s.clone());
            }
            let s = self.solve(u, i)?;
            cache.insert((u, i.clone()), s.clone());
            Ok(s)
        };
        for (k, &vi) in scope.iter().enumerate() {
            let rest: Vec<VarId> = scope.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &v)| v).collect();
            // each other scope variable is either free (index 0) or set to value index - 1
            let radices: Vec<usize> = rest.iter().map(|&w| self.sig.domain_size(w) + 1).collect();
            let total: usize = radices.iter().product();
            for code in 0..total {
                let choice = decode(code, &radices);
                let base: Vec<(VarId, ValId)> =
                    rest.iter().zip(&choice).filter(|(_, &c)| c > 0).map(|(&w, &c)| (w, c - 1)).collect();
                let d = self.sig.domain_size(vi);
                for a in 0..d {
                    for b in (a + 1)..d {
                        let mut pa = base.clone();
                        pa.push((vi, a));
                        let mut pb = base.clone();
                        pb.push((vi, b));
                        let ia = Intervention::new(pa).unwrap();
                        let ib = Intervention::new(pb).unwrap();
                        for (u, _) in &self.dist {
                            let sa = solved(*u, &ia)?;
                            let sb = solved(*u, &ib)?;
                            for vj in 0..n {
                                if vj != vi && sa[vj] != sb[vj] {
                                    rel.insert((vi, vj));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(rel)
    }

    /// No influence runs from a later variable to an earlier one in `ord`.
    pub fn compatible_with(&self, ord: &VariableOrder, cap: usize) -> Result<bool, InfluenceError> {
        let scope: Vec<VarId> = (0..self.sig.len()).collect();
        let rel = self.influences(&scope, cap)?;
        Ok(rel.iter().all(|&(a, b)| match (ord.rank(a), ord.rank(b)) {
            (Some(ra), Some(rb)) => ra < rb,
            _ => false,
        }))
    }
}

/// Why a model has no recursive order: `f_var` changes when `input` moves
/// from its value in `endo` to `alt`, and `input` is itself downstream.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct NonRecursive {
    pub var: VarId,
    pub input: VarId,
    pub endo: Vec<ValId>,
    pub exo: Vec<ValId>,
    pub alt: ValId,
}

impl fmt::Display for NonRecursive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "model is not recursive: function of variable #{} depends on variable #{} at table entry endo={:?} exo={:?}",
            self.var, self.input, self.endo, self.exo
        )
    }
}

/// Caches solutions per intervention so many terms share the work.
pub struct Evaluator<'a> {
    m: &'a Scm,
    cache: HashMap<Intervention, Vec<Vec<ValId>>>,
}

impl<'a> Evaluator<'a> {
    fn solutions(&mut self, i: &Intervention) -> Result<&Vec<Vec<ValId>>, EvalError> {
        if !self.cache.contains_key(i) {
            let sols = self.m.dist.iter().map(|(u, _)| self.m.solve(*u, i)).collect::<Result<Vec<_>, _>>()?;
            self.cache.insert(i.clone(), sols);
        }
        Ok(&self.cache[i])
    }

    /// Per support point, whether `e` holds.
    pub fn truth(&mut self, e: &FullFormula) -> Result<Vec<bool>, EvalError> {
        let k = self.m.dist.len();
        let mut out = Vec::with_capacity(k);
        for idx in 0..k {
            out.push(e.eval_with(&mut |i| self.solutions(i).map(|s| s[idx].clone()))?);
        }
        Ok(out)
    }

    pub fn prob(&mut self, e: &FullFormula) -> Result<BigRational, EvalError> {
        let t = self.truth(e)?;
        Ok(self.m.dist.iter().zip(t).filter(|(_, b)| *b).map(|((_, w), _)| w.clone()).sum())
    }

    /// Exact value; a conditional with a null condition is 1.
    pub fn term_value(&mut self, t: &Term) -> Result<BigRational, EvalError> {
        Ok(match t {
            Term::Prob(e) => self.prob(e)?,
            Term::CondProb(e, g) => {
                let den = self.prob(g)?;
                if den.is_zero() {
                    BigRational::one()
                } else {
                    self.prob(&FullFormula::and(e.clone(), g.clone()))? / den
                }
            }
            Term::Sum(a, b) => self.term_value(a)? + self.term_value(b)?,
            Term::Product(a, b) => self.term_value(a)? * self.term_value(b)?,
            Term::Const(c) => c.clone(),
        })
    }

    pub fn model_check(&mut self, phi: &ProbFormula) -> Result<bool, EvalError> {
        phi.eval_atoms(&mut |a, b| Ok(self.term_value(a)? >= self.term_value(b)?))
    }
}

/// Mixed-radix encoding with the first digit most significant.
pub(crate) fn encode(digits: &[usize], radices: impl IntoIterator<Item = usize>) -> usize {
    digits.iter().zip(radices).fold(0, |acc, (&d, r)| acc * r + d)
}

pub(crate) fn decode(mut code: usize, radices: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    for k in (0..radices.len()).rev() {
        out[k] = code % radices[k];
        code /= radices[k];
    }
    out
}

fn decode_into(
    code: usize,
    radices: impl DoubleEndedIterator<Item = usize> + ExactSizeIterator,
    set: &mut impl FnMut(usize, usize),
) {
    let mut code = code;
    let n = radices.len();
    for (k, r) in radices.rev().enumerate() {
        set(n - 1 - k, code % r);
        code /= r;
    }
}
