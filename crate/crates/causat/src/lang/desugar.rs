//! Rewriting rational constants into probabilities of fresh events.
//!
//! A constant `a/q` with `0 <= a < q` becomes `P(E=1 | ... | E=a)` for a
//! fresh `E` with values `1..q`, and the formula is conjoined with
//! `P(E=1) = P(E=k)` for every `k`, which forces each value to `1/q`.
//! Whole parts become copies of `P(T)` for a tautology `T`, and zero
//! becomes the probability of a contradiction.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::{FullFormula, ProbFormula, PropFormula, Signature, SignatureError, Term, VarDecl, VarId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DesugarError {
    #[error("negative constant {0} has no event encoding")]
    Negative(BigRational),
    #[error("constant {0} has a denominator too large to encode")]
    TooLarge(BigRational),
    #[error("{0}")]
    Signature(#[from] SignatureError),
}

/// Denominators above this are rejected, since each needs that many values.
pub const MAX_DENOMINATOR: usize = 1 << 12;

struct Rewriter {
    decls: Vec<VarDecl>,
    fresh: BTreeMap<usize, VarId>,
    /// Variable used for the tautology and contradiction events.
    anchor: Option<VarId>,
}

impl Rewriter {
    fn name(&self, base: String) -> String {
        let taken = |n: &str| self.decls.iter().any(|d| d.name == n);
        if !taken(&base) {
            return base;
        }
        (1..).map(|k| format!("{base}_{k}")).find(|n| !taken(n)).unwrap()
    }

    fn anchor(&mut self) -> VarId {
        if let Some(v) = self.anchor {
            return v;
        }
        let name = self.name("T".into());
        self.decls.push(VarDecl { name, domain: vec!["0".into(), "1".into()] });
        let v = self.decls.len() - 1;
        self.anchor = Some(v);
        v
    }

    fn falsum(&mut self) -> FullFormula {
        let v = self.anchor();
        FullFormula::bare(PropFormula::and(PropFormula::assign(v, 0), PropFormula::not(PropFormula::assign(v, 0))))
    }

    fn verum(&mut self) -> FullFormula {
        let v = self.anchor();
        FullFormula::bare(PropFormula::not(PropFormula::and(
            PropFormula::assign(v, 0),
            PropFormula::not(PropFormula::assign(v, 0)),
        )))
    }

    fn uniform(&mut self, q: usize) -> VarId {
        if let Some(&v) = self.fresh.get(&q) {
            return v;
        }
        let name = self.name(format!("E{q}"));
        self.decls.push(VarDecl { name, domain: (1..=q).map(|k| k.to_string()).collect() });
        let v = self.decls.len() - 1;
        self.fresh.insert(q, v);
        v
    }

    fn constant(&mut self, c: &BigRational) -> Result<Term, DesugarError> {
        if c.is_negative() {
            return Err(DesugarError::Negative(c.clone()));
        }
        let q =
            c.denom().to_usize().filter(|&q| q <= MAX_DENOMINATOR).ok_or_else(|| DesugarError::TooLarge(c.clone()))?;
        let (whole, rest) = c.numer().div_rem(c.denom());
        let mut parts = Vec::new();
        let whole = whole.to_usize().ok_or_else(|| DesugarError::TooLarge(c.clone()))?;
        for _ in 0..whole {
            parts.push(Term::prob(self.verum()));
        }
        if !rest.is_zero() {
            let e = self.uniform(q);
            let a = rest.to_usize().expect("below the denominator");
            let event =
                (1..a).fold(PropFormula::assign(e, 0), |acc, k| PropFormula::or(acc, PropFormula::assign(e, k)));
            parts.push(Term::prob(FullFormula::bare(event)));
        }
        if parts.is_empty() {
            parts.push(Term::prob(self.falsum()));
        }
        Ok(Term::sum_all(parts).expect("nonempty"))
    }

    fn term(&mut self, t: &Term) -> Result<Term, DesugarError> {
        Ok(match t {
            Term::Const(c) => self.constant(c)?,
            Term::Prob(_) | Term::CondProb(..) => t.clone(),
            Term::Sum(a, b) => Term::sum(self.term(a)?, self.term(b)?),
            Term::Product(a, b) => Term::product(self.term(a)?, self.term(b)?),
        })
    }

    fn formula(&mut self, f: &ProbFormula) -> Result<ProbFormula, DesugarError> {
        Ok(match f {
            ProbFormula::Geq(a, b) => ProbFormula::geq(self.term(a)?, self.term(b)?),
            ProbFormula::Not(p) => ProbFormula::not(self.formula(p)?),
            ProbFormula::And(a, b) => ProbFormula::and(self.formula(a)?, self.formula(b)?),
        })
    }
}

/// Replace every constant by an event probability over an extended
/// signature. Models of the result restrict to models of `phi`, and any
/// model of `phi` extends to one of the result by independent uniform
/// fresh variables.
pub fn desugar_constants(sig: &Signature, phi: &ProbFormula) -> Result<(Signature, ProbFormula), DesugarError> {
    let mut r = Rewriter { decls: sig.vars().to_vec(), fresh: BTreeMap::new(), anchor: (!sig.is_empty()).then_some(0) };
    let mut out = r.formula(phi)?;
    for (&q, &e) in &r.fresh {
        let first = Term::prob(FullFormula::bare(PropFormula::assign(e, 0)));
        for k in 1..q {
            let other = Term::prob(FullFormula::bare(PropFormula::assign(e, k)));
            out = ProbFormula::and(out, ProbFormula::eq(first.clone(), other));
        }
    }
    Ok((Signature::new(r.decls)?, out))
}
