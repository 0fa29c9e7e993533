//! Polynomial systems over the reals from probabilistic formulas.
//!
//! Each merged column of atoms becomes a variable in `[0, 1]`, each block
//! sums to one, every `P(e)` becomes a sum of columns and every
//! `P(e | g)` an auxiliary `y` with `(P(g) = 0 and y = 1) or
//! (P(g) > 0 and y P(g) = P(e and g))`. Disjunctions are resolved by 0/1
//! selector variables guarding each side.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::atoms::{Atomization, Columns};
use super::poly::Poly;
use super::{measure_context, Measure, SolverError};
use crate::lang::{print_event, FullFormula, ProbFormula, Signature, Term};
use crate::statedesc::DeltaContext;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    /// Mass of a column, in `[0, 1]`.
    Prob,
    /// Value of a conditional probability, in `[0, 1]`.
    CondAux,
    /// Branch choice, `0` or `1`. `prefer` is the branch most often
    /// consistent, when one is known.
    Selector { prefer: Option<bool> },
    /// Unbounded real.
    Free,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EtrVar {
    pub name: String,
    pub kind: VarKind,
}

pub use super::lp::Rel;

/// `poly rel 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub poly: Poly,
    pub rel: Rel,
}

impl Constraint {
    pub fn holds(&self, x: &[BigRational]) -> bool {
        let v = self.poly.eval(x);
        match self.rel {
            Rel::Eq => v.is_zero(),
            Rel::Ge => !v.is_negative(),
            Rel::Gt => v.is_positive(),
        }
    }
}

/// Maps a solution back to a measure on the formula's context.
#[derive(Clone, Debug)]
struct Decoder {
    atoms: Atomization,
    columns: Columns,
    target: Arc<DeltaContext>,
}

#[derive(Clone, Debug, Default)]
pub struct EtrSystem {
    pub vars: Vec<EtrVar>,
    pub constraints: Vec<Constraint>,
    /// Variables of each probability simplex.
    pub blocks: Vec<Vec<usize>>,
    /// Polynomial of `P(e)` for each event of the formula.
    pub events: HashMap<FullFormula, Poly>,
    decoder: Option<Decoder>,
}

impl EtrSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind) -> usize {
        self.vars.push(EtrVar { name: name.into(), kind });
        self.vars.len() - 1
    }

    pub fn add(&mut self, poly: Poly, rel: Rel) {
        if let Some(c) = poly.as_constant() {
            let ok = match rel {
                Rel::Eq => c.is_zero(),
                Rel::Ge => !c.is_negative(),
                Rel::Gt => c.is_positive(),
            };
            if ok {
                return;
            }
        }
        self.constraints.push(Constraint { poly, rel });
    }

    pub fn degree(&self) -> u32 {
        self.constraints.iter().map(|c| c.poly.degree()).max().unwrap_or(0)
    }

    /// Exact check of a point, including the variable bounds.
    pub fn holds(&self, x: &[BigRational]) -> bool {
        x.len() == self.vars.len()
            && self.vars.iter().zip(x).all(|(v, x)| match v.kind {
                VarKind::Prob | VarKind::CondAux => !x.is_negative() && *x <= BigRational::one(),
                VarKind::Selector { .. } => x.is_zero() || x.is_one(),
                VarKind::Free => true,
            })
            && self.constraints.iter().all(|c| c.holds(x))
    }

    /// Value of `P(e)` at a point, for events of the source formula.
    pub fn probability(&self, e: &FullFormula, x: &[f64]) -> Option<f64> {
        self.events.get(e).map(|p| p.eval_f64(x))
    }

    /// Approximate event probabilities at `x`, for messages.
    pub fn describe(&self, sig: &Signature, x: &[f64]) -> String {
        let mut parts: Vec<String> =
            self.events.iter().map(|(e, p)| format!("P({}) ~ {:.10}", print_event(sig, e), p.eval_f64(x))).collect();
        parts.sort();
        parts.dedup();
        parts.join(", ")
    }

    /// The measure a solution describes, for systems built from formulas.
    pub fn measure(&self, x: &[BigRational]) -> Option<Measure> {
        let d = self.decoder.as_ref()?;
        let cols: Vec<BigRational> = self.blocks.iter().flatten().map(|&v| x[v].clone()).collect();
        Some(d.atoms.joint_measure(&d.target, &d.columns.expand(&cols, d.atoms.unknowns())))
    }
}

struct Builder {
    sys: EtrSystem,
    /// ETR variable of each column.
    col_var: Vec<usize>,
    columns: Columns,
    conds: HashMap<(FullFormula, FullFormula), usize>,
}

impl Builder {
    fn prob(&mut self, e: &FullFormula) -> Result<Poly, SolverError> {
        if let Some(p) = self.sys.events.get(e) {
            return Ok(p.clone());
        }
        let cols = self.columns.events.get(e).expect("events collected up front").clone();
        let p = cols.iter().fold(Poly::zero(), |acc, &c| acc.add(&Poly::var(self.col_var[c])));
        self.sys.events.insert(e.clone(), p.clone());
        Ok(p)
    }

    fn term(&mut self, t: &Term) -> Result<Poly, SolverError> {
        Ok(match t {
            Term::Prob(e) => self.prob(e)?,
            Term::Const(c) => Poly::constant(c.clone()),
            Term::Sum(a, b) => self.term(a)?.add(&self.term(b)?),
            Term::Product(a, b) => self.term(a)?.mul(&self.term(b)?),
            Term::CondProb(e, g) => {
                let key = (e.clone(), g.clone());
                if let Some(&y) = self.conds.get(&key) {
                    return Ok(Poly::var(y));
                }
                let num = self.prob(&FullFormula::and(e.clone(), g.clone()))?;
                let den = self.prob(g)?;
                let k = self.conds.len();
                let y = self.sys.add_var(format!("y{k}"), VarKind::CondAux);
                let s = self.sys.add_var(format!("c{k}"), VarKind::Selector { prefer: Some(false) });
                self.conds.insert(key, y);
                let (sv, yv) = (Poly::var(s), Poly::var(y));
                let ns = Poly::one().sub(&sv);
                self.sys.add(sv.mul(&Poly::one().sub(&sv)), Rel::Eq);
                // s = 1: zero denominator, value one
                self.sys.add(sv.mul(&den), Rel::Eq);
                self.sys.add(sv.mul(&yv.sub(&Poly::one())), Rel::Eq);
                // s = 0: positive denominator, y den = num
                self.sys.add(ns.mul(&den).add(&sv), Rel::Gt);
                self.sys.add(ns.mul(&yv.mul(&den).sub(&num)), Rel::Eq);
                yv
            }
        })
    }

    /// Encode `f` (negated when `neg`) as holding wherever `guard` is one.
    fn formula(&mut self, f: &ProbFormula, neg: bool, guard: &Poly) -> Result<(), SolverError> {
        match (f, neg) {
            (ProbFormula::Not(p), _) => self.formula(p, !neg, guard),
            (ProbFormula::Geq(a, b), false) => {
                let d = self.term(a)?.sub(&self.term(b)?);
                self.sys.add(guard.mul(&d), Rel::Ge);
                Ok(())
            }
            (ProbFormula::Geq(a, b), true) => {
                let d = self.term(b)?.sub(&self.term(a)?);
                self.sys.add(guard.mul(&d).add(&Poly::one().sub(guard)), Rel::Gt);
                Ok(())
            }
            (ProbFormula::And(a, b), false) => {
                if let (ProbFormula::Geq(x1, y1), ProbFormula::Geq(x2, y2)) = (&**a, &**b) {
                    if x1 == y2 && y1 == x2 {
                        let d = self.term(x1)?.sub(&self.term(y1)?);
                        self.sys.add(guard.mul(&d), Rel::Eq);
                        return Ok(());
                    }
                }
                self.formula(a, false, guard)?;
                self.formula(b, false, guard)
            }
            (ProbFormula::And(a, b), true) => {
                let k = self.sys.vars.len();
                let s = self.sys.add_var(format!("s{k}"), VarKind::Selector { prefer: None });
                let sv = Poly::var(s);
                self.sys.add(sv.mul(&Poly::one().sub(&sv)), Rel::Eq);
                self.formula(a, true, &guard.mul(&sv))?;
                self.formula(b, true, &guard.mul(&Poly::one().sub(&sv)))
            }
        }
    }
}

/// The system for `psi` over its factored atoms.
pub fn build_etr(sig: &Signature, psi: &ProbFormula) -> Result<EtrSystem, SolverError> {
    let mut atoms = Atomization::factored(sig, psi)?;
    build_etr_with(sig, psi, &mut atoms)
}

/// The system for `psi` over the given atoms.
pub fn build_etr_with(sig: &Signature, psi: &ProbFormula, atoms: &mut Atomization) -> Result<EtrSystem, SolverError> {
    let target = measure_context(sig, psi)?;
    let mut events: Vec<FullFormula> = Vec::new();
    let mut seen = BTreeSet::new();
    psi.visit_terms(&mut |t| {
        let mut stack = vec![t];
        while let Some(t) = stack.pop() {
            match t {
                Term::Prob(e) => events.push(e.clone()),
                Term::CondProb(e, g) => {
                    events.push(FullFormula::and(e.clone(), g.clone()));
                    events.push(g.clone());
                }
                Term::Sum(a, b) | Term::Product(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
                Term::Const(_) => {}
            }
        }
    });
    events.retain(|e| seen.insert(e.clone()));
    let refs: Vec<&FullFormula> = events.iter().collect();
    let columns = atoms.columns(&refs)?;
    let mut sys = EtrSystem::new();
    let mut col_var = vec![0; columns.len()];
    for simplex in &columns.simplices {
        let mut block = Vec::new();
        for &c in simplex {
            let v = sys.add_var(format!("p{c}"), VarKind::Prob);
            col_var[c] = v;
            block.push(v);
        }
        sys.blocks.push(block);
    }
    for block in sys.blocks.clone() {
        let sum = block.iter().fold(Poly::zero(), |acc, &v| acc.add(&Poly::var(v)));
        sys.add(sum.sub(&Poly::one()), Rel::Eq);
    }
    let mut b = Builder { sys, col_var, columns, conds: HashMap::new() };
    b.formula(psi, false, &Poly::one())?;
    let Builder { mut sys, columns, .. } = b;
    sys.decoder = Some(Decoder { atoms: atoms.clone(), columns, target });
    Ok(sys)
}
