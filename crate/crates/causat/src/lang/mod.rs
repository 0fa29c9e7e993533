//! Formula languages over a finite signature.
//!
//! Events are built in three layers: propositional formulas over
//! `V = v` assignments, intervention-prefixed formulas `[a] b`, and
//! probability terms compared by `>=`. Every identifier is resolved
//! against a [`Signature`] at parse time, so the ASTs carry indices
//! rather than names.

mod classify;
mod desugar;
mod lexer;
mod parser;
mod print;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use thiserror::Error;

pub use classify::{classify, Arith, Fragment};
pub use desugar::{desugar_constants, DesugarError, MAX_DENOMINATOR};
pub use parser::{parse_document, parse_formula, parse_formulas, parse_signature, ParseError, ParseErrorKind, Pos};
pub use print::{print_event, print_formula, print_intervention, print_prop, print_signature, print_term};

pub type VarId = usize;
pub type ValId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub name: String,
    pub domain: Vec<String>,
}

impl VarDecl {
    pub fn new(name: impl Into<String>, domain: &[&str]) -> Self {
        VarDecl { name: name.into(), domain: domain.iter().map(|s| s.to_string()).collect() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("value `{value}` listed twice in the domain of `{var}`")]
    DuplicateValue { var: String, value: String },
    #[error("variable `{0}` has an empty domain")]
    EmptyDomain(String),
}

/// Ordered list of variables, each with a finite list of values.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Signature {
    vars: Vec<VarDecl>,
}

impl Signature {
    pub fn new(vars: Vec<VarDecl>) -> Result<Self, SignatureError> {
        let mut names = BTreeSet::new();
        for v in &vars {
            if !names.insert(v.name.as_str()) {
                return Err(SignatureError::DuplicateVariable(v.name.clone()));
            }
            if v.domain.is_empty() {
                return Err(SignatureError::EmptyDomain(v.name.clone()));
            }
            let mut seen = BTreeSet::new();
            for x in &v.domain {
                if !seen.insert(x.as_str()) {
                    return Err(SignatureError::DuplicateValue { var: v.name.clone(), value: x.clone() });
                }
            }
        }
        Ok(Signature { vars })
    }

    /// Signature of `{0,1}`-valued variables.
    pub fn binary(names: &[&str]) -> Self {
        Signature::new(names.iter().map(|n| VarDecl::new(*n, &["0", "1"])).collect())
            .expect("binary signature names must be distinct")
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[VarDecl] {
        &self.vars
    }

    pub fn var(&self, v: VarId) -> &VarDecl {
        &self.vars[v]
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.vars[v].name
    }

    pub fn value_name(&self, v: VarId, x: ValId) -> &str {
        &self.vars[v].domain[x]
    }

    pub fn domain_size(&self, v: VarId) -> usize {
        self.vars[v].domain.len()
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|d| d.name == name)
    }

    pub fn value(&self, v: VarId, name: &str) -> Option<ValId> {
        self.vars[v].domain.iter().position(|x| x == name)
    }

    /// Resolve `name = value`, panicking on unknown names. Test and demo helper.
    pub fn assign(&self, name: &str, value: &str) -> (VarId, ValId) {
        let v = self.lookup(name).unwrap_or_else(|| panic!("unknown variable {name}"));
        let x = self.value(v, value).unwrap_or_else(|| panic!("unknown value {value} for {name}"));
        (v, x)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("variable {0} assigned twice in one intervention")]
pub struct DuplicateAssignment(pub VarId);

/// Partial map from variables to values; empty means the trivial intervention.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Intervention(Vec<(VarId, ValId)>);

impl Intervention {
    pub fn trivial() -> Self {
        Intervention(Vec::new())
    }

    pub fn new(mut pairs: Vec<(VarId, ValId)>) -> Result<Self, DuplicateAssignment> {
        pairs.sort_unstable();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DuplicateAssignment(w[0].0));
            }
        }
        Ok(Intervention(pairs))
    }

    pub fn single(v: VarId, x: ValId) -> Self {
        Intervention(vec![(v, x)])
    }

    pub fn is_trivial(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, v: VarId) -> Option<ValId> {
        self.0.binary_search_by_key(&v, |p| p.0).ok().map(|i| self.0[i].1)
    }

    pub fn pairs(&self) -> &[(VarId, ValId)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PropFormula {
    Assign(VarId, ValId),
    Not(Box<PropFormula>),
    And(Box<PropFormula>, Box<PropFormula>),
}

#[allow(clippy::should_implement_trait)]
impl PropFormula {
    pub fn assign(v: VarId, x: ValId) -> Self {
        PropFormula::Assign(v, x)
    }

    pub fn not(p: PropFormula) -> Self {
        PropFormula::Not(Box::new(p))
    }

    pub fn and(a: PropFormula, b: PropFormula) -> Self {
        PropFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: PropFormula, b: PropFormula) -> Self {
        Self::not(Self::and(Self::not(a), Self::not(b)))
    }

    pub fn implies(a: PropFormula, b: PropFormula) -> Self {
        Self::not(Self::and(a, Self::not(b)))
    }

    /// Canonical contradiction `V=x & V=y` for two distinct values.
    pub fn contradiction(v: VarId, x: ValId, y: ValId) -> Self {
        debug_assert_ne!(x, y);
        Self::and(Self::assign(v, x), Self::assign(v, y))
    }

    /// Evaluate under a total assignment given as a lookup.
    pub fn eval(&self, value_of: &impl Fn(VarId) -> ValId) -> bool {
        match self {
            PropFormula::Assign(v, x) => value_of(*v) == *x,
            PropFormula::Not(p) => !p.eval(value_of),
            PropFormula::And(a, b) => a.eval(value_of) && b.eval(value_of),
        }
    }

    pub fn visit_assignments(&self, f: &mut impl FnMut(VarId, ValId)) {
        match self {
            PropFormula::Assign(v, x) => f(*v, *x),
            PropFormula::Not(p) => p.visit_assignments(f),
            PropFormula::And(a, b) => {
                a.visit_assignments(f);
                b.visit_assignments(f);
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            PropFormula::Assign(..) => 1,
            PropFormula::Not(p) => 1 + p.size(),
            PropFormula::And(a, b) => 1 + a.size() + b.size(),
        }
    }
}

/// Boolean combination of intervention-prefixed propositional formulas.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FullFormula {
    Box(Intervention, PropFormula),
    Not(Box<FullFormula>),
    And(Box<FullFormula>, Box<FullFormula>),
}

#[allow(clippy::should_implement_trait)]
impl FullFormula {
    pub fn bare(p: PropFormula) -> Self {
        FullFormula::Box(Intervention::trivial(), p)
    }

    pub fn boxed(i: Intervention, p: PropFormula) -> Self {
        FullFormula::Box(i, p)
    }

    pub fn not(e: FullFormula) -> Self {
        FullFormula::Not(Box::new(e))
    }

    pub fn and(a: FullFormula, b: FullFormula) -> Self {
        FullFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: FullFormula, b: FullFormula) -> Self {
        Self::not(Self::and(Self::not(a), Self::not(b)))
    }

    /// True when every box in the formula is trivial.
    pub fn is_pure(&self) -> bool {
        match self {
            FullFormula::Box(i, _) => i.is_trivial(),
            FullFormula::Not(e) => e.is_pure(),
            FullFormula::And(a, b) => a.is_pure() && b.is_pure(),
        }
    }

    /// Collapse every maximal subtree whose boxes are all trivial into a
    /// single trivial box. Parsing always yields this form.
    pub fn canonical(&self) -> FullFormula {
        if let Some(p) = self.as_prop() {
            return FullFormula::bare(p);
        }
        match self {
            FullFormula::Box(..) => self.clone(),
            FullFormula::Not(e) => FullFormula::not(e.canonical()),
            FullFormula::And(a, b) => FullFormula::and(a.canonical(), b.canonical()),
        }
    }

    /// The propositional content, if every box is trivial.
    pub fn as_prop(&self) -> Option<PropFormula> {
        match self {
            FullFormula::Box(i, p) if i.is_trivial() => Some(p.clone()),
            FullFormula::Box(..) => None,
            FullFormula::Not(e) => e.as_prop().map(PropFormula::not),
            FullFormula::And(a, b) => Some(PropFormula::and(a.as_prop()?, b.as_prop()?)),
        }
    }

    pub fn visit_boxes<'a>(&'a self, f: &mut impl FnMut(&'a Intervention, &'a PropFormula)) {
        match self {
            FullFormula::Box(i, p) => f(i, p),
            FullFormula::Not(e) => e.visit_boxes(f),
            FullFormula::And(a, b) => {
                a.visit_boxes(f);
                b.visit_boxes(f);
            }
        }
    }

    /// Evaluate given a solver for the post-intervention state.
    pub fn eval_with<E>(&self, solve: &mut impl FnMut(&Intervention) -> Result<Vec<ValId>, E>) -> Result<bool, E> {
        Ok(match self {
            FullFormula::Box(i, p) => {
                let state = solve(i)?;
                p.eval(&|v| state[v])
            }
            FullFormula::Not(e) => !e.eval_with(solve)?,
            FullFormula::And(a, b) => a.eval_with(solve)? && b.eval_with(solve)?,
        })
    }

    pub fn size(&self) -> usize {
        match self {
            FullFormula::Box(i, p) => 1 + i.len() + p.size(),
            FullFormula::Not(e) => 1 + e.size(),
            FullFormula::And(a, b) => 1 + a.size() + b.size(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Prob(FullFormula),
    CondProb(FullFormula, FullFormula),
    Sum(Box<Term>, Box<Term>),
    Product(Box<Term>, Box<Term>),
    Const(BigRational),
}

impl Term {
    pub fn prob(e: FullFormula) -> Self {
        Term::Prob(e)
    }

    pub fn cond(e: FullFormula, given: FullFormula) -> Self {
        Term::CondProb(e, given)
    }

    pub fn sum(a: Term, b: Term) -> Self {
        Term::Sum(Box::new(a), Box::new(b))
    }

    pub fn product(a: Term, b: Term) -> Self {
        Term::Product(Box::new(a), Box::new(b))
    }

    pub fn constant(c: BigRational) -> Self {
        Term::Const(c)
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Term::Const(BigRational::new(n.into(), d.into()))
    }

    /// Left-nested sum of the given terms; `None` when empty.
    pub fn sum_all(terms: impl IntoIterator<Item = Term>) -> Option<Term> {
        terms.into_iter().reduce(Term::sum)
    }

    pub fn visit_events<'a>(&'a self, f: &mut impl FnMut(&'a FullFormula)) {
        match self {
            Term::Prob(e) => f(e),
            Term::CondProb(a, b) => {
                f(a);
                f(b);
            }
            Term::Sum(a, b) | Term::Product(a, b) => {
                a.visit_events(f);
                b.visit_events(f);
            }
            Term::Const(_) => {}
        }
    }

    pub fn map_events(&self, f: &mut impl FnMut(&FullFormula) -> FullFormula) -> Term {
        match self {
            Term::Prob(e) => Term::Prob(f(e)),
            Term::CondProb(a, b) => Term::CondProb(f(a), f(b)),
            Term::Sum(a, b) => Term::sum(a.map_events(f), b.map_events(f)),
            Term::Product(a, b) => Term::product(a.map_events(f), b.map_events(f)),
            Term::Const(c) => Term::Const(c.clone()),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Prob(e) => 1 + e.size(),
            Term::CondProb(a, b) => 1 + a.size() + b.size(),
            Term::Sum(a, b) | Term::Product(a, b) => 1 + a.size() + b.size(),
            Term::Const(_) => 1,
        }
    }
}

/// Boolean combination of `t >= t` atoms. The relations `=`, `>`, `<=`
/// and `<` are sugar over `Geq` and `Not`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ProbFormula {
    Geq(Term, Term),
    Not(Box<ProbFormula>),
    And(Box<ProbFormula>, Box<ProbFormula>),
}

#[allow(clippy::should_implement_trait)]
impl ProbFormula {
    pub fn geq(a: Term, b: Term) -> Self {
        ProbFormula::Geq(a, b)
    }

    pub fn le(a: Term, b: Term) -> Self {
        ProbFormula::Geq(b, a)
    }

    pub fn gt(a: Term, b: Term) -> Self {
        Self::not(ProbFormula::Geq(b, a))
    }

    pub fn lt(a: Term, b: Term) -> Self {
        Self::not(ProbFormula::Geq(a, b))
    }

    pub fn eq(a: Term, b: Term) -> Self {
        Self::and(ProbFormula::Geq(a.clone(), b.clone()), ProbFormula::Geq(b, a))
    }

    pub fn not(f: ProbFormula) -> Self {
        ProbFormula::Not(Box::new(f))
    }

    pub fn and(a: ProbFormula, b: ProbFormula) -> Self {
        ProbFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: ProbFormula, b: ProbFormula) -> Self {
        Self::not(Self::and(Self::not(a), Self::not(b)))
    }

    pub fn implies(a: ProbFormula, b: ProbFormula) -> Self {
        Self::not(Self::and(a, Self::not(b)))
    }

    /// Conjunction of all formulas; `None` when empty.
    pub fn and_all(fs: impl IntoIterator<Item = ProbFormula>) -> Option<ProbFormula> {
        fs.into_iter().reduce(ProbFormula::and)
    }

    pub fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(&'a Term, &'a Term)) {
        match self {
            ProbFormula::Geq(a, b) => f(a, b),
            ProbFormula::Not(p) => p.visit_atoms(f),
            ProbFormula::And(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
        }
    }

    pub fn visit_terms<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        self.visit_atoms(&mut |a, b| {
            f(a);
            f(b);
        });
    }

    pub fn visit_events<'a>(&'a self, f: &mut impl FnMut(&'a FullFormula)) {
        self.visit_terms(&mut |t| t.visit_events(f));
    }

    pub fn map_events(&self, f: &mut impl FnMut(&FullFormula) -> FullFormula) -> ProbFormula {
        match self {
            ProbFormula::Geq(a, b) => ProbFormula::Geq(a.map_events(f), b.map_events(f)),
            ProbFormula::Not(p) => Self::not(p.map_events(f)),
            ProbFormula::And(a, b) => Self::and(a.map_events(f), b.map_events(f)),
        }
    }

    /// Evaluate the Boolean structure given a truth value for each atom.
    pub fn eval_atoms<E>(&self, atom: &mut impl FnMut(&Term, &Term) -> Result<bool, E>) -> Result<bool, E> {
        Ok(match self {
            ProbFormula::Geq(a, b) => atom(a, b)?,
            ProbFormula::Not(p) => !p.eval_atoms(atom)?,
            ProbFormula::And(a, b) => a.eval_atoms(atom)? && b.eval_atoms(atom)?,
        })
    }

    /// Number of AST nodes, counting terms and events.
    pub fn size(&self) -> usize {
        match self {
            ProbFormula::Geq(a, b) => 1 + a.size() + b.size(),
            ProbFormula::Not(p) => 1 + p.size(),
            ProbFormula::And(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Distinct events in order of first occurrence.
    pub fn events(&self) -> Vec<&FullFormula> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.visit_events(&mut |e| {
            if seen.insert(e) {
                out.push(e);
            }
        });
        out
    }
}

/// Interventions occurring in boxes, including the trivial one when some
/// event is unboxed.
pub fn mentioned_interventions(phi: &ProbFormula) -> BTreeSet<Intervention> {
    let mut out = BTreeSet::new();
    phi.visit_events(&mut |e| {
        e.visit_boxes(&mut |i, _| {
            out.insert(i.clone());
        })
    });
    out
}

/// Variables occurring in any event or intervention.
pub fn mentioned_variables(phi: &ProbFormula) -> BTreeSet<VarId> {
    mentioned_values(phi).into_keys().collect()
}

/// For each mentioned variable, the values it is compared against or set to.
pub fn mentioned_values(phi: &ProbFormula) -> BTreeMap<VarId, BTreeSet<ValId>> {
    let mut out: BTreeMap<VarId, BTreeSet<ValId>> = BTreeMap::new();
    phi.visit_events(&mut |e| {
        e.visit_boxes(&mut |i, p| {
            for &(v, x) in i.pairs() {
                out.entry(v).or_default().insert(x);
            }
            p.visit_assignments(&mut |v, x| {
                out.entry(v).or_default().insert(x);
            });
        })
    });
    out
}

impl fmt::Display for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fragment: {}, causal: {}", self.arithmetic, if self.causal { "yes" } else { "no" })
    }
}
