//! Complete state descriptions restricted to the vocabulary of a formula.
//!
//! A description fixes, for every mentioned intervention and every
//! mentioned variable, the value that variable takes after the
//! intervention. Values range over the values the formula mentions plus
//! one representative of the unmentioned ones.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::lang::{
    mentioned_interventions, mentioned_values, print_intervention, FullFormula, Intervention, ProbFormula, PropFormula,
    Signature, ValId, VarDecl, VarId,
};
use crate::scm::{Scm, ScmError, VariableOrder};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaContext {
    interventions: Vec<Intervention>,
    vars: Vec<VarId>,
    assignments: Vec<Vec<ValId>>,
    fresh: Vec<Option<ValId>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContextError {
    #[error("intervention listed twice")]
    DuplicateIntervention,
    #[error("variable #{0} listed twice")]
    DuplicateVariable(VarId),
    #[error("variable #{0} has no candidate values")]
    NoValues(VarId),
    #[error("assignment lists do not match the variable list")]
    Shape,
    #[error("intervention sets variable #{0}, which is not in the context")]
    InterventionVariable(VarId),
}

/// Build the context of `phi`: mentioned interventions plus the trivial
/// one, mentioned variables, and per variable its mentioned values plus the
/// least-index unmentioned value when one exists.
pub fn build_context(sig: &Signature, phi: &ProbFormula) -> DeltaContext {
    let mut interventions: BTreeSet<Intervention> = mentioned_interventions(phi);
    interventions.insert(Intervention::trivial());
    let values = mentioned_values(phi);
    let mut vars = Vec::new();
    let mut assignments = Vec::new();
    let mut fresh = Vec::new();
    for (v, mentioned) in values {
        let star = (0..sig.domain_size(v)).find(|x| !mentioned.contains(x));
        let mut vals: Vec<ValId> = mentioned.into_iter().collect();
        if let Some(s) = star {
            vals.push(s);
            vals.sort_unstable();
        }
        vars.push(v);
        assignments.push(vals);
        fresh.push(star);
    }
    DeltaContext { interventions: interventions.into_iter().collect(), vars, assignments, fresh }
}

impl DeltaContext {
    /// Context with explicit parts. Interventions keep the given order.
    pub fn new(
        interventions: Vec<Intervention>,
        vars: Vec<VarId>,
        assignments: Vec<Vec<ValId>>,
    ) -> Result<DeltaContext, ContextError> {
        if vars.len() != assignments.len() {
            return Err(ContextError::Shape);
        }
        let mut seen = BTreeSet::new();
        for &v in &vars {
            if !seen.insert(v) {
                return Err(ContextError::DuplicateVariable(v));
            }
        }
        let distinct: BTreeSet<&Intervention> = interventions.iter().collect();
        if distinct.len() != interventions.len() {
            return Err(ContextError::DuplicateIntervention);
        }
        for i in &interventions {
            if let Some(&(v, _)) = i.pairs().iter().find(|(v, _)| !seen.contains(v)) {
                return Err(ContextError::InterventionVariable(v));
            }
        }
        let mut sorted = Vec::with_capacity(assignments.len());
        for (k, mut a) in assignments.into_iter().enumerate() {
            a.sort_unstable();
            a.dedup();
            if a.is_empty() {
                return Err(ContextError::NoValues(vars[k]));
            }
            sorted.push(a);
        }
        let fresh = vec![None; vars.len()];
        Ok(DeltaContext { interventions, vars, assignments: sorted, fresh })
    }

    pub fn interventions(&self) -> &[Intervention] {
        &self.interventions
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    /// Candidate values of the `k`-th context variable.
    pub fn assignments(&self, k: usize) -> &[ValId] {
        &self.assignments[k]
    }

    /// The representative unmentioned value of the `k`-th variable, if any.
    pub fn fresh(&self, k: usize) -> Option<ValId> {
        self.fresh[k]
    }

    pub fn var_index(&self, v: VarId) -> Option<usize> {
        self.vars.iter().position(|&w| w == v)
    }

    pub fn intervention_index(&self, i: &Intervention) -> Option<usize> {
        self.interventions.iter().position(|j| j == i)
    }

    fn cells(&self) -> usize {
        self.interventions.len() * self.vars.len()
    }

    /// Number of descriptions, `prod_V |Assignments(V)|^|I|`; `None` on overflow.
    pub fn count(&self) -> Option<u128> {
        let per: u128 = self.assignments.iter().try_fold(1u128, |acc, a| acc.checked_mul(a.len() as u128))?;
        (0..self.interventions.len()).try_fold(1u128, |acc, _| acc.checked_mul(per))
    }
}

/// One element of the description space: a value for every (intervention,
/// variable) cell, stored row-major by intervention.
#[derive(Clone, Debug)]
pub struct StateDescription {
    ctx: Arc<DeltaContext>,
    table: Vec<ValId>,
}

impl PartialEq for StateDescription {
    fn eq(&self, other: &Self) -> bool {
        self.table == other.table && (Arc::ptr_eq(&self.ctx, &other.ctx) || self.ctx == other.ctx)
    }
}

impl Eq for StateDescription {}

impl std::hash::Hash for StateDescription {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.table.hash(state);
    }
}

impl PartialOrd for StateDescription {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StateDescription {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.table.cmp(&other.table)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DescriptionError {
    #[error("table has {found} cells, context needs {expected}")]
    Shape { expected: usize, found: usize },
    #[error("cell ({row}, {col}) holds a value outside the variable's candidates")]
    Value { row: usize, col: usize },
}

impl StateDescription {
    /// Description from rows of values, one row per context intervention.
    pub fn new(ctx: Arc<DeltaContext>, rows: Vec<Vec<ValId>>) -> Result<Self, DescriptionError> {
        let table: Vec<ValId> = rows.concat();
        if rows.len() != ctx.interventions.len() || table.len() != ctx.cells() {
            return Err(DescriptionError::Shape { expected: ctx.cells(), found: table.len() });
        }
        let n = ctx.vars.len();
        for (c, &x) in table.iter().enumerate() {
            if !ctx.assignments[c % n].contains(&x) {
                return Err(DescriptionError::Value { row: c / n, col: c % n });
            }
        }
        Ok(StateDescription { ctx, table })
    }

    pub fn context(&self) -> &Arc<DeltaContext> {
        &self.ctx
    }

    /// Value of the `k`-th context variable after the `a`-th intervention.
    pub fn value(&self, a: usize, k: usize) -> ValId {
        self.table[a * self.ctx.vars.len() + k]
    }

    pub fn row(&self, a: usize) -> &[ValId] {
        let n = self.ctx.vars.len();
        &self.table[a * n..(a + 1) * n]
    }

    pub fn table(&self) -> &[ValId] {
        &self.table
    }

    /// The description as `/\_a [a] /\_V V = value`.
    pub fn to_formula(&self) -> FullFormula {
        let mut conj: Option<FullFormula> = None;
        for (a, i) in self.ctx.interventions.iter().enumerate() {
            let body = self
                .ctx
                .vars
                .iter()
                .enumerate()
                .map(|(k, &v)| PropFormula::assign(v, self.value(a, k)))
                .reduce(PropFormula::and);
            let Some(body) = body else { continue };
            let part = FullFormula::boxed(i.clone(), body);
            conj = Some(match conj {
                None => part,
                Some(c) => FullFormula::and(c, part),
            });
        }
        conj.map(|c| c.canonical())
            .unwrap_or_else(|| FullFormula::bare(PropFormula::not(PropFormula::contradiction(0, 0, 1))))
    }
}

/// Lazy enumeration of every description in lexicographic order of cells,
/// first cell most significant.
pub fn iterate_descriptions(ctx: &Arc<DeltaContext>) -> Descriptions {
    Descriptions { ctx: ctx.clone(), digits: Some(vec![0; ctx.cells()]) }
}

pub struct Descriptions {
    ctx: Arc<DeltaContext>,
    digits: Option<Vec<usize>>,
}

impl Iterator for Descriptions {
    type Item = StateDescription;

    fn next(&mut self) -> Option<StateDescription> {
        let digits = self.digits.as_mut()?;
        let n = self.ctx.vars.len();
        let table = digits.iter().enumerate().map(|(c, &d)| self.ctx.assignments[c % n][d]).collect();
        let out = StateDescription { ctx: self.ctx.clone(), table };
        let mut c = digits.len();
        loop {
            if c == 0 {
                self.digits = None;
                break;
            }
            c -= 1;
            digits[c] += 1;
            if digits[c] < self.ctx.assignments[c % n].len() {
                break;
            }
            digits[c] = 0;
        }
        Some(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CompatibilityVerdict {
    Compatible,
    /// `intervention` sets `var` but the description gives it another value.
    Unsatisfiable {
        var: VarId,
        intervention: Intervention,
    },
    /// Neither intervention sets `var`, they agree on every earlier
    /// variable, and they disagree on `var`.
    Incompatible {
        var: VarId,
        first: Intervention,
        second: Intervention,
    },
}

impl CompatibilityVerdict {
    pub fn is_compatible(&self) -> bool {
        matches!(self, CompatibilityVerdict::Compatible)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("order does not enumerate the context variables")]
pub struct OrderMismatch;

fn ranks(ctx: &DeltaContext, ord: &VariableOrder) -> Result<Vec<usize>, OrderMismatch> {
    if !ord.enumerates(&ctx.vars.iter().copied().collect()) {
        return Err(OrderMismatch);
    }
    Ok(ord.vars().iter().map(|&v| ctx.var_index(v).unwrap()).collect())
}

/// Check a description against a variable order by the two-loop table scan:
/// first intervened values against their results, then agreement of
/// non-intervened results given agreement on all earlier variables.
pub fn check_compatibility(
    delta: &StateDescription,
    ord: &VariableOrder,
) -> Result<CompatibilityVerdict, OrderMismatch> {
    let ctx = &delta.ctx;
    let cols = ranks(ctx, ord)?;
    let rows = ctx.interventions.len();
    for (i, &k) in cols.iter().enumerate() {
        let var = ctx.vars[k];
        for (a, alpha) in ctx.interventions.iter().enumerate() {
            if let Some(v) = alpha.get(var) {
                if delta.value(a, k) != v {
                    return Ok(CompatibilityVerdict::Unsatisfiable { var, intervention: alpha.clone() });
                }
            }
        }
        for a in 0..rows {
            if ctx.interventions[a].get(var).is_some() {
                continue;
            }
            for b in (a + 1)..rows {
                if ctx.interventions[b].get(var).is_some() {
                    continue;
                }
                let agree = cols[..i].iter().all(|&j| delta.value(a, j) == delta.value(b, j));
                if agree && delta.value(a, k) != delta.value(b, k) {
                    return Ok(CompatibilityVerdict::Incompatible {
                        var,
                        first: ctx.interventions[a].clone(),
                        second: ctx.interventions[b].clone(),
                    });
                }
            }
        }
    }
    Ok(CompatibilityVerdict::Compatible)
}

/// Render the results table the compatibility check scans, columns in order.
pub fn trace_table(sig: &Signature, delta: &StateDescription, ord: &VariableOrder) -> Result<String, OrderMismatch> {
    let ctx = &delta.ctx;
    let cols = ranks(ctx, ord)?;
    let labels: Vec<String> = ctx
        .interventions
        .iter()
        .map(|i| if i.is_trivial() { "[]".to_string() } else { format!("[{}]", print_intervention(sig, i)) })
        .collect();
    let width = labels.iter().map(|l| l.len()).max().unwrap_or(0).max(12);
    let mut out = format!("{:width$}", "intervention");
    for &k in &cols {
        write!(out, " | {:>6}", sig.var_name(ctx.vars[k])).unwrap();
    }
    out.push('\n');
    for (a, label) in labels.iter().enumerate() {
        write!(out, "{label:width$}").unwrap();
        for &k in &cols {
            let v = ctx.vars[k];
            write!(out, " | {:>6}", sig.value_name(v, delta.value(a, k))).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("more than {0} compatible descriptions")]
pub struct TooManyDescriptions(pub usize);

/// Every description that passes [`check_compatibility`] under `ord`,
/// generated column by column without visiting rejected ones.
pub fn compatible_descriptions(
    ctx: &Arc<DeltaContext>,
    ord: &VariableOrder,
    limit: usize,
) -> Result<Result<Vec<StateDescription>, TooManyDescriptions>, OrderMismatch> {
    let cols = ranks(ctx, ord)?;
    let rows = ctx.interventions.len();
    let n = ctx.vars.len();
    let mut out = Vec::new();
    let mut table = vec![0; rows * n];
    let ok = fill_column(ctx, &cols, 0, &mut table, &mut out, limit);
    Ok(if ok { Ok(out) } else { Err(TooManyDescriptions(limit)) })
}

fn fill_column(
    ctx: &Arc<DeltaContext>,
    cols: &[usize],
    i: usize,
    table: &mut Vec<ValId>,
    out: &mut Vec<StateDescription>,
    limit: usize,
) -> bool {
    let n = ctx.vars.len();
    let rows = ctx.interventions.len();
    if i == cols.len() {
        if out.len() >= limit {
            return false;
        }
        out.push(StateDescription { ctx: ctx.clone(), table: table.clone() });
        return true;
    }
    let k = cols[i];
    let var = ctx.vars[k];
    let choices = &ctx.assignments[k];
    // group the free rows by their values on earlier columns
    let mut groups: Vec<(Vec<ValId>, Vec<usize>)> = Vec::new();
    for a in 0..rows {
        match ctx.interventions[a].get(var) {
            Some(v) => {
                if !choices.contains(&v) {
                    return true;
                }
                table[a * n + k] = v;
            }
            None => {
                let key: Vec<ValId> = cols[..i].iter().map(|&j| table[a * n + j]).collect();
                match groups.iter_mut().find(|g| g.0 == key) {
                    Some(g) => g.1.push(a),
                    None => groups.push((key, vec![a])),
                }
            }
        }
    }
    let mut pick = vec![0usize; groups.len()];
    loop {
        for (g, &p) in groups.iter().zip(&pick) {
            for &a in &g.1 {
                table[a * n + k] = choices[p];
            }
        }
        if !fill_column(ctx, cols, i + 1, table, out, limit) {
            return false;
        }
        let mut c = pick.len();
        loop {
            if c == 0 {
                return true;
            }
            c -= 1;
            pick[c] += 1;
            if pick[c] < choices.len() {
                break;
            }
            pick[c] = 0;
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoverageError {
    #[error("event uses an intervention outside the description's context")]
    Intervention,
    #[error("event mentions variable #{0}, which is outside the description's context")]
    Variable(VarId),
}

/// Whether `delta` entails `e`, reading each `[a] b` off the row for `a`.
pub fn entails(delta: &StateDescription, e: &FullFormula) -> Result<bool, CoverageError> {
    let ctx = &delta.ctx;
    match e {
        FullFormula::Box(i, p) => {
            let a = ctx.intervention_index(i).ok_or(CoverageError::Intervention)?;
            let mut missing = None;
            p.visit_assignments(&mut |v, _| {
                if ctx.var_index(v).is_none() {
                    missing.get_or_insert(v);
                }
            });
            if let Some(v) = missing {
                return Err(CoverageError::Variable(v));
            }
            let row = delta.row(a);
            Ok(p.eval(&|v| row[ctx.var_index(v).unwrap()]))
        }
        FullFormula::Not(q) => Ok(!entails(delta, q)?),
        FullFormula::And(a, b) => Ok(entails(delta, a)? && entails(delta, b)?),
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeasureError {
    #[error("measure weights sum to {0}, not 1")]
    WeightSum(BigRational),
    #[error("negative weight {0}")]
    NegativeWeight(BigRational),
    #[error("measure charges a description that fails the compatibility check: {0:?}")]
    Incompatible(CompatibilityVerdict),
    #[error("{0}")]
    Order(#[from] OrderMismatch),
    #[error("{0}")]
    Model(#[from] ScmError),
}

/// Name of the single exogenous variable in reconstructed models.
pub const EXO_NAME: &str = "U";

/// Build a model inducing `mu`: one exogenous variable ranging over the
/// support, and for each support point a deterministic system of
/// equations along `ord` that realizes that description. Inputs the
/// description leaves open map to the least domain value, as do variables
/// outside the context.
pub fn model_from_measure(
    sig: &Signature,
    ctx: &Arc<DeltaContext>,
    ord: &VariableOrder,
    mu: &[(StateDescription, BigRational)],
) -> Result<Scm, MeasureError> {
    let cols = ranks(ctx, ord)?;
    let mut total = BigRational::zero();
    for (d, w) in mu {
        if *w < BigRational::zero() {
            return Err(MeasureError::NegativeWeight(w.clone()));
        }
        total += w;
        let verdict = check_compatibility(d, ord)?;
        if !verdict.is_compatible() {
            return Err(MeasureError::Incompatible(verdict));
        }
    }
    if !total.is_one() {
        return Err(MeasureError::WeightSum(total));
    }
    let support: Vec<&(StateDescription, BigRational)> = mu.iter().filter(|(_, w)| !w.is_zero()).collect();
    // per support point, per ordered position: earlier values -> value
    let functions: Vec<Vec<HashMap<Vec<ValId>, ValId>>> = support
        .iter()
        .map(|(d, _)| {
            cols.iter()
                .enumerate()
                .map(|(i, &k)| {
                    let var = ctx.vars[k];
                    let mut f = HashMap::new();
                    for (a, alpha) in ctx.interventions.iter().enumerate() {
                        if alpha.get(var).is_none() {
                            let key: Vec<ValId> = cols[..i].iter().map(|&j| d.value(a, j)).collect();
                            f.insert(key, d.value(a, k));
                        }
                    }
                    f
                })
                .collect()
        })
        .collect();
    let position: BTreeMap<VarId, usize> = ord.vars().iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let exo =
        vec![VarDecl { name: EXO_NAME.to_string(), domain: (0..support.len()).map(|s| format!("d{s}")).collect() }];
    let dist = support.iter().enumerate().map(|(s, (_, w))| (vec![s], w.clone())).collect();
    let m = Scm::from_fn(sig.clone(), exo, dist, |v, endo, u| {
        let Some(&i) = position.get(&v) else { return 0 };
        let key: Vec<ValId> = ord.vars()[..i].iter().map(|&w| endo[w]).collect();
        functions[u[0]][i].get(&key).copied().unwrap_or(0)
    })?;
    Ok(m)
}
