//! Exact decision procedure for formulas whose terms are linear in
//! probabilities: case split over the atoms, each branch a linear
//! feasibility problem over the atom weights.

use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::atoms::Atomization;
use super::fm::{solve_fm, DEFAULT_CAP};
use super::lp::{LinearProblem, Rel, Row};
use super::simplex::solve_simplex;
use super::{measure_context, ProbOutcome, ProbSolver, SolverError};
use crate::lang::{FullFormula, ProbFormula, Signature, Term};

/// `sum c_e P(e) + constant`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinExpr {
    pub coeffs: BTreeMap<FullFormula, BigRational>,
    pub constant: BigRational,
}

impl LinExpr {
    fn scale(mut self, k: &BigRational) -> Self {
        for c in self.coeffs.values_mut() {
            *c *= k;
        }
        self.constant *= k;
        self.coeffs.retain(|_, c| !c.is_zero());
        self
    }

    fn add(mut self, other: LinExpr, sign: bool) -> Self {
        for (e, c) in other.coeffs {
            let slot = self.coeffs.entry(e).or_insert_with(BigRational::zero);
            if sign {
                *slot += c;
            } else {
                *slot -= c;
            }
        }
        if sign {
            self.constant += other.constant;
        } else {
            self.constant -= other.constant;
        }
        self.coeffs.retain(|_, c| !c.is_zero());
        self
    }
}

/// Linear form of a term, `None` when it has a conditional or a product
/// of two non-constant factors.
pub fn linearize(t: &Term) -> Option<LinExpr> {
    Some(match t {
        Term::Prob(e) => {
            let mut coeffs = BTreeMap::new();
            coeffs.insert(e.clone(), BigRational::from_integer(1.into()));
            LinExpr { coeffs, constant: BigRational::zero() }
        }
        Term::Const(c) => LinExpr { coeffs: BTreeMap::new(), constant: c.clone() },
        Term::CondProb(..) => return None,
        Term::Sum(a, b) => linearize(a)?.add(linearize(b)?, true),
        Term::Product(a, b) => {
            let (a, b) = (linearize(a)?, linearize(b)?);
            if a.coeffs.is_empty() {
                b.scale(&a.constant)
            } else if b.coeffs.is_empty() {
                a.scale(&b.constant)
            } else {
                return None;
            }
        }
    })
}

pub fn is_linear(psi: &ProbFormula) -> bool {
    let mut ok = true;
    psi.visit_terms(&mut |t| ok &= linearize(t).is_some());
    ok
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LinearMethod {
    /// Elimination, falling back to simplex when it grows too large.
    #[default]
    Auto,
    Elimination,
    Simplex,
}

#[derive(Clone, Debug)]
pub struct LinearSolver {
    pub method: LinearMethod,
    /// Constraint limit for elimination.
    pub cap: usize,
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver { method: LinearMethod::Auto, cap: DEFAULT_CAP }
    }
}

impl LinearSolver {
    pub fn with_method(method: LinearMethod) -> Self {
        LinearSolver { method, ..Self::default() }
    }

    pub fn feasible(&self, p: &LinearProblem) -> Option<Vec<BigRational>> {
        match self.method {
            LinearMethod::Simplex => solve_simplex(p),
            LinearMethod::Elimination => solve_fm(p, usize::MAX).expect("uncapped"),
            LinearMethod::Auto => solve_fm(p, self.cap).unwrap_or_else(|_| solve_simplex(p)),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tri {
    T,
    F,
    U,
}

fn eval3(f: &ProbFormula, atom_of: &HashMap<(&Term, &Term), usize>, val: &[Option<bool>]) -> Tri {
    match f {
        ProbFormula::Geq(a, b) => match val[atom_of[&(a, b)]] {
            Some(true) => Tri::T,
            Some(false) => Tri::F,
            None => Tri::U,
        },
        ProbFormula::Not(p) => match eval3(p, atom_of, val) {
            Tri::T => Tri::F,
            Tri::F => Tri::T,
            Tri::U => Tri::U,
        },
        ProbFormula::And(a, b) => match eval3(a, atom_of, val) {
            Tri::F => Tri::F,
            x => match (x, eval3(b, atom_of, val)) {
                (_, Tri::F) => Tri::F,
                (Tri::T, Tri::T) => Tri::T,
                _ => Tri::U,
            },
        },
    }
}

/// Atom polarities forced by the top-level conjunction.
fn required(f: &ProbFormula, atom_of: &HashMap<(&Term, &Term), usize>) -> Vec<(usize, bool)> {
    fn go(f: &ProbFormula, pol: bool, atom_of: &HashMap<(&Term, &Term), usize>, out: &mut Vec<(usize, bool)>) {
        match f {
            ProbFormula::Geq(a, b) => out.push((atom_of[&(a, b)], pol)),
            ProbFormula::Not(p) => go(p, !pol, atom_of, out),
            ProbFormula::And(a, b) if pol => {
                go(a, true, atom_of, out);
                go(b, true, atom_of, out);
            }
            ProbFormula::And(..) => {}
        }
    }
    let mut out = Vec::new();
    go(f, true, atom_of, &mut out);
    out
}

struct Search<'a> {
    psi: &'a ProbFormula,
    atom_of: HashMap<(&'a Term, &'a Term), usize>,
    /// `lhs - rhs` of each atom over the columns.
    forms: Vec<(Vec<BigRational>, BigRational)>,
    cols: usize,
    simplices: Vec<Vec<usize>>,
    solver: &'a LinearSolver,
    checks: usize,
}

impl Search<'_> {
    fn theory(&mut self, val: &[Option<bool>]) -> Option<Vec<BigRational>> {
        self.checks += 1;
        let mut rows: Vec<Row> = Vec::new();
        let mut seen: HashMap<(Vec<BigRational>, BigRational), usize> = HashMap::new();
        for (k, v) in val.iter().enumerate() {
            let Some(v) = v else { continue };
            let (c, d) = &self.forms[k];
            let row = if *v {
                Row { coeffs: c.clone(), constant: d.clone(), rel: Rel::Ge }
            } else {
                Row { coeffs: c.iter().map(|x| -x).collect(), constant: -d, rel: Rel::Gt }
            };
            // a >= b together with b >= a is one equation
            let neg = (row.coeffs.iter().map(|x| -x).collect::<Vec<_>>(), -&row.constant);
            if row.rel == Rel::Ge {
                if let Some(&j) = seen.get(&neg) {
                    if rows[j].rel == Rel::Ge {
                        rows[j].rel = Rel::Eq;
                        continue;
                    }
                }
            }
            let key = (row.coeffs.clone(), row.constant.clone());
            if let Some(&j) = seen.get(&key) {
                if rows[j].rel == row.rel || rows[j].rel == Rel::Eq {
                    continue;
                }
            }
            seen.insert(key, rows.len());
            rows.push(row);
        }
        let p = LinearProblem { n: self.cols, simplices: self.simplices.clone(), rows };
        self.solver.feasible(&p)
    }

    fn dpll(&mut self, val: &mut Vec<Option<bool>>) -> Option<Vec<BigRational>> {
        match eval3(self.psi, &self.atom_of, val) {
            Tri::F => return None,
            Tri::T => return self.theory(val),
            Tri::U => {}
        }
        let x = self.theory(val)?;
        // a branch whose witness already decides every open atom the
        // right way is done
        let mut guess = val.clone();
        for (k, g) in guess.iter_mut().enumerate() {
            if g.is_none() {
                let (c, d) = &self.forms[k];
                let v: BigRational = c.iter().zip(&x).map(|(a, b)| a * b).sum::<BigRational>() + d;
                *g = Some(!v.is_negative());
            }
        }
        if eval3(self.psi, &self.atom_of, &guess) == Tri::T {
            return Some(x);
        }
        let k = val.iter().position(|v| v.is_none()).expect("open atom");
        for pol in [true, false] {
            val[k] = Some(pol);
            if eval3(self.psi, &self.atom_of, val) == Tri::F {
                continue;
            }
            if let Some(x) = self.dpll(val) {
                return Some(x);
            }
        }
        val[k] = None;
        None
    }
}

/// Decide `psi` exactly. The measure lives on `build_context(psi)`.
pub fn solve_linear(sig: &Signature, psi: &ProbFormula, solver: &LinearSolver) -> Result<ProbOutcome, SolverError> {
    let target = measure_context(sig, psi)?;
    let mut atom_list: Vec<(&Term, &Term)> = Vec::new();
    let mut atom_of = HashMap::new();
    let mut lin = Vec::new();
    let mut bad = None;
    psi.visit_atoms(&mut |a, b| {
        if atom_of.contains_key(&(a, b)) {
            return;
        }
        match (linearize(a), linearize(b)) {
            (Some(la), Some(lb)) => {
                atom_of.insert((a, b), atom_list.len());
                atom_list.push((a, b));
                lin.push(la.add(lb, false));
            }
            _ => bad = Some(()),
        }
    });
    if bad.is_some() {
        return Err(SolverError::Fragment("term is not linear in probabilities".into()));
    }
    let mut atoms = Atomization::factored(sig, psi)?;
    let events: Vec<&FullFormula> = {
        let mut seen = std::collections::BTreeSet::new();
        lin.iter().flat_map(|l| l.coeffs.keys()).filter(|e| seen.insert(*e)).collect()
    };
    let cols = atoms.columns(&events)?;
    let ncols = cols.reps.len();
    let forms = lin
        .iter()
        .map(|l| {
            let mut c = vec![BigRational::zero(); ncols];
            for (e, k) in &l.coeffs {
                for &j in &cols.events[e] {
                    c[j] += k;
                }
            }
            (c, l.constant.clone())
        })
        .collect();
    let mut search = Search { psi, atom_of, forms, cols: ncols, simplices: cols.simplices.clone(), solver, checks: 0 };
    let mut val = vec![None; atom_list.len()];
    for (k, pol) in required(psi, &search.atom_of) {
        match val[k] {
            Some(p) if p != pol => return Ok(ProbOutcome::Unsat),
            _ => val[k] = Some(pol),
        }
    }
    let Some(x) = search.dpll(&mut val) else {
        return Ok(ProbOutcome::Unsat);
    };
    let m = atoms.joint_measure(&target, &cols.expand(&x, atoms.unknowns()));
    if !m.satisfies(sig, psi)? {
        return Err(SolverError::Witness("linear witness fails the formula".into()));
    }
    Ok(ProbOutcome::Sat(m))
}

impl ProbSolver for LinearSolver {
    fn name(&self) -> &str {
        "linear"
    }

    fn solve_prob(&self, sig: &Signature, psi: &ProbFormula) -> Result<ProbOutcome, SolverError> {
        solve_linear(sig, psi, self)
    }

    fn complete_for(&self, psi: &ProbFormula) -> bool {
        is_linear(psi)
    }
}
