//! Encoding of the inverse-constrained real feasibility problem as a
//! conditional-probability formula.
//!
//! Variable `x_i` in `[1/2, 2]` is represented by `P(D_i = 1) = x_i / 2n`.
//! `x_i x_j = 1` becomes independence of `D_i` and `D_j` together with
//! `P(D_i = 1 and D_j = 1) = 1 / 4n^2`; `x_i + x_j = x_k` uses a fresh
//! three-valued `S` whose values 1 and 2 are disjoint copies of `D_i` and
//! `D_j`. The constant `1/N` is `P(E_N = 1)` for a fresh `E_N` whose `N`
//! values are forced equally likely.

use std::collections::BTreeMap;

use num_rational::BigRational;
use rand::Rng;
use thiserror::Error;

use crate::lang::{FullFormula, ProbFormula, PropFormula, Signature, Term, VarDecl, VarId};

/// Variables `x_0..x_{n-1}` in `[1/2, 2]` under sum and inverse constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EtrInverseInstance {
    pub n: usize,
    /// `(i, j, k)`: `x_i + x_j = x_k`.
    pub plus: Vec<(usize, usize, usize)>,
    /// `(i, j)`: `x_i x_j = 1`.
    pub inverse: Vec<(usize, usize)>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstanceError {
    #[error("instance needs at least one variable")]
    Empty,
    #[error("index {0} out of range")]
    Index(usize),
}

impl EtrInverseInstance {
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.n == 0 {
            return Err(InstanceError::Empty);
        }
        let idx =
            self.plus.iter().flat_map(|&(a, b, c)| [a, b, c]).chain(self.inverse.iter().flat_map(|&(a, b)| [a, b]));
        for i in idx {
            if i >= self.n {
                return Err(InstanceError::Index(i));
            }
        }
        Ok(())
    }

    /// Exact check of a candidate point, bounds included.
    pub fn holds(&self, x: &[BigRational]) -> bool {
        let (lo, hi) = (crate::rat(1, 2), crate::rat(2, 1));
        x.len() == self.n
            && x.iter().all(|v| *v >= lo && *v <= hi)
            && self.plus.iter().all(|&(i, j, k)| &x[i] + &x[j] == x[k])
            && self.inverse.iter().all(|&(i, j)| (&x[i] * &x[j]) == crate::rat(1, 1))
    }

    /// Largest constraint violation of a floating point candidate.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0f64;
        for v in x {
            worst = worst.max(0.5 - v).max(v - 2.0);
        }
        for &(i, j, k) in &self.plus {
            worst = worst.max((x[i] + x[j] - x[k]).abs());
        }
        for &(i, j) in &self.inverse {
            worst = worst.max((x[i] * x[j] - 1.0).abs());
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct Encoding {
    pub sig: Signature,
    pub formula: ProbFormula,
    /// `D_i` for each instance variable.
    pub d: Vec<VarId>,
    pub n: usize,
}

impl Encoding {
    /// The event `D_i = 1`.
    pub fn event(&self, i: usize) -> FullFormula {
        FullFormula::bare(PropFormula::assign(self.d[i], 1))
    }

    /// `x_i = 2n P(D_i = 1)`.
    pub fn decode(&self, prob: &impl Fn(&FullFormula) -> f64) -> Vec<f64> {
        (0..self.d.len()).map(|i| 2.0 * self.n as f64 * prob(&self.event(i))).collect()
    }

    pub fn decode_exact(&self, prob: &impl Fn(&FullFormula) -> BigRational) -> Vec<BigRational> {
        let two_n = BigRational::from_integer((2 * self.n).into());
        (0..self.d.len()).map(|i| &two_n * prob(&self.event(i))).collect()
    }
}

struct Build {
    decls: Vec<VarDecl>,
    parts: Vec<ProbFormula>,
    /// `E_N` for each constant `1/N` in use.
    consts: BTreeMap<usize, VarId>,
}

fn binary(name: String) -> VarDecl {
    VarDecl { name, domain: vec!["0".into(), "1".into()] }
}

fn p(v: VarId, x: usize) -> Term {
    Term::prob(FullFormula::bare(PropFormula::assign(v, x)))
}

impl Build {
    fn var(&mut self, d: VarDecl) -> VarId {
        self.decls.push(d);
        self.decls.len() - 1
    }

    /// `P(E_N = 1)`, which the formula forces to `1/N`.
    fn inv(&mut self, n: usize) -> Term {
        if let Some(&e) = self.consts.get(&n) {
            return p(e, 0);
        }
        let e = self.var(VarDecl { name: format!("E{n}"), domain: (1..=n).map(|k| k.to_string()).collect() });
        self.consts.insert(n, e);
        for k in 1..n {
            self.parts.push(ProbFormula::eq(p(e, 0), p(e, k)));
        }
        p(e, 0)
    }
}

pub fn encode_etr_inverse(inst: &EtrInverseInstance) -> Result<Encoding, InstanceError> {
    inst.validate()?;
    let n = inst.n;
    let mut b = Build { decls: Vec::new(), parts: Vec::new(), consts: BTreeMap::new() };
    let d: Vec<VarId> = (0..n).map(|i| b.var(binary(format!("D{}", i + 1)))).collect();
    for &di in &d {
        let hi = b.inv(n);
        let lo = b.inv(4 * n);
        b.parts.push(ProbFormula::geq(hi, p(di, 1)));
        b.parts.push(ProbFormula::geq(p(di, 1), lo));
    }
    let mut copies: BTreeMap<usize, VarId> = BTreeMap::new();
    for &(i, j) in &inst.inverse {
        // a variable is never independent of itself, so a square uses a copy
        let dj = if i == j {
            *copies.entry(i).or_insert_with(|| {
                let c = b.var(binary(format!("C{}", i + 1)));
                b.parts.push(ProbFormula::eq(p(c, 1), p(d[i], 1)));
                c
            })
        } else {
            d[j]
        };
        let ei = FullFormula::bare(PropFormula::assign(d[i], 1));
        let ej = FullFormula::bare(PropFormula::assign(dj, 1));
        b.parts.push(ProbFormula::eq(Term::cond(ei.clone(), ej.clone()), Term::prob(ei.clone())));
        let quarter = b.inv(4 * n * n);
        b.parts.push(ProbFormula::eq(Term::prob(FullFormula::and(ei, ej)), quarter));
    }
    for (t, &(i, j, k)) in inst.plus.iter().enumerate() {
        let s = b.var(VarDecl { name: format!("S{}", t + 1), domain: vec!["0".into(), "1".into(), "2".into()] });
        b.parts.push(ProbFormula::eq(p(s, 1), p(d[i], 1)));
        b.parts.push(ProbFormula::eq(p(s, 2), p(d[j], 1)));
        let either = FullFormula::bare(PropFormula::or(PropFormula::assign(s, 1), PropFormula::assign(s, 2)));
        b.parts.push(ProbFormula::eq(Term::prob(either), p(d[k], 1)));
    }
    let sig = Signature::new(b.decls).expect("generated names are distinct");
    let formula = ProbFormula::and_all(b.parts).expect("bounds are always present");
    Ok(Encoding { sig, formula, d, n })
}

/// A random satisfiable instance with a known witness: each variable is
/// free, the inverse of an earlier one, or the sum of two earlier ones
/// when that stays in range.
pub fn planted_instance(rng: &mut impl Rng, n: usize) -> (EtrInverseInstance, Vec<BigRational>) {
    let mut x: Vec<BigRational> = Vec::with_capacity(n);
    let mut inst = EtrInverseInstance { n, plus: Vec::new(), inverse: Vec::new() };
    let two = crate::rat(2, 1);
    for i in 0..n {
        let choice = if i == 0 { 0 } else { rng.gen_range(0..3) };
        let v = match choice {
            1 => {
                let j = rng.gen_range(0..i);
                inst.inverse.push((i, j));
                BigRational::from_integer(1.into()) / &x[j]
            }
            2 => {
                let (j, k) = (rng.gen_range(0..i), rng.gen_range(0..i));
                let s = &x[j] + &x[k];
                if s <= two {
                    inst.plus.push((j, k, i));
                    s
                } else {
                    crate::rat(rng.gen_range(2..=8), 4)
                }
            }
            _ => crate::rat(rng.gen_range(2..=8), 4),
        };
        x.push(v);
    }
    debug_assert!(inst.holds(&x));
    (inst, x)
}
