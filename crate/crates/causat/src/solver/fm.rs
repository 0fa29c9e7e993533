//! Feasibility by exact variable elimination: equalities by substitution,
//! then Fourier-Motzkin projection with strictness tracking, then back
//! substitution for a witness.

use std::collections::HashSet;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use super::lp::{LinearProblem, Rel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("elimination produced more than {0} constraints")]
pub struct Blowup(pub usize);

/// Default limit on live constraints during projection.
pub const DEFAULT_CAP: usize = 500;

#[derive(Clone, PartialEq, Eq, Hash)]
struct Ineq {
    coeffs: Vec<BigRational>,
    constant: BigRational,
    strict: bool,
}

impl Ineq {
    fn value(&self, x: &[BigRational]) -> BigRational {
        self.coeffs.iter().zip(x).filter(|(a, _)| !a.is_zero()).map(|(a, b)| a * b).sum::<BigRational>()
            + &self.constant
    }

    /// Scale so the largest coefficient magnitude is one.
    fn normalize(mut self) -> Self {
        let m = self.coeffs.iter().map(|a| a.abs()).max();
        if let Some(m) = m.filter(|m| !m.is_zero()) {
            for a in &mut self.coeffs {
                *a /= &m;
            }
            self.constant /= m;
        }
        self
    }
}

struct Stage {
    var: usize,
    lower: Vec<Ineq>,
    upper: Vec<Ineq>,
}

/// A point satisfying the problem, `None` if infeasible.
pub fn solve_fm(p: &LinearProblem, cap: usize) -> Result<Option<Vec<BigRational>>, Blowup> {
    let n = p.n;
    let zero = || BigRational::zero();
    let mut eqs: Vec<(Vec<BigRational>, BigRational)> = Vec::new();
    let mut ineqs: Vec<Ineq> = Vec::new();
    for s in &p.simplices {
        let mut c = vec![zero(); n];
        for &i in s {
            c[i] = BigRational::one();
        }
        eqs.push((c, -BigRational::one()));
    }
    for r in &p.rows {
        match r.rel {
            Rel::Eq => eqs.push((r.coeffs.clone(), r.constant.clone())),
            Rel::Ge | Rel::Gt => {
                ineqs.push(Ineq { coeffs: r.coeffs.clone(), constant: r.constant.clone(), strict: r.rel == Rel::Gt })
            }
        }
    }
    for i in 0..n {
        let mut c = vec![zero(); n];
        c[i] = BigRational::one();
        ineqs.push(Ineq { coeffs: c, constant: zero(), strict: false });
    }

    // x_var = expr . x + constant, with a zero coefficient at var
    let mut subs: Vec<(usize, Vec<BigRational>, BigRational)> = Vec::new();
    let mut k = 0;
    while k < eqs.len() {
        let (c, d) = eqs[k].clone();
        k += 1;
        let Some(piv) = c.iter().position(|a| !a.is_zero()) else {
            if !d.is_zero() {
                return Ok(None);
            }
            continue;
        };
        let a = c[piv].clone();
        let mut expr: Vec<BigRational> = c.iter().map(|x| -x / &a).collect();
        expr[piv] = zero();
        let konst = -&d / &a;
        let apply = |coeffs: &mut Vec<BigRational>, constant: &mut BigRational| {
            let f = std::mem::replace(&mut coeffs[piv], zero());
            if f.is_zero() {
                return;
            }
            for (x, e) in coeffs.iter_mut().zip(&expr) {
                if !e.is_zero() {
                    *x += &f * e;
                }
            }
            *constant += &f * &konst;
        };
        for (ec, ed) in eqs[k..].iter_mut() {
            apply(ec, ed);
        }
        for q in ineqs.iter_mut() {
            apply(&mut q.coeffs, &mut q.constant);
        }
        for (_, se, sc) in subs.iter_mut() {
            apply(se, sc);
        }
        subs.push((piv, expr, konst));
    }

    let mut stages: Vec<Stage> = Vec::new();
    let mut live: Vec<usize> = (0..n).filter(|&v| !subs.iter().any(|s| s.0 == v)).collect();
    loop {
        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(ineqs.len());
        for q in ineqs {
            if q.coeffs.iter().all(|a| a.is_zero()) {
                let ok = if q.strict { q.constant.is_positive() } else { !q.constant.is_negative() };
                if !ok {
                    return Ok(None);
                }
                continue;
            }
            let q = q.normalize();
            if seen.insert(q.clone()) {
                kept.push(q);
            }
        }
        ineqs = kept;
        live.retain(|&v| ineqs.iter().any(|q| !q.coeffs[v].is_zero()));
        let Some(&var) = live.iter().min_by_key(|&&v| {
            let pos = ineqs.iter().filter(|q| q.coeffs[v].is_positive()).count();
            let neg = ineqs.iter().filter(|q| q.coeffs[v].is_negative()).count();
            (pos * neg) as isize - (pos + neg) as isize
        }) else {
            break;
        };
        let (mut lower, mut upper, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for q in ineqs {
            if q.coeffs[var].is_positive() {
                lower.push(q);
            } else if q.coeffs[var].is_negative() {
                upper.push(q);
            } else {
                rest.push(q);
            }
        }
        if rest.len() + lower.len() * upper.len() > cap {
            return Err(Blowup(cap));
        }
        for l in &lower {
            for u in &upper {
                let (a, b) = (l.coeffs[var].clone(), -u.coeffs[var].clone());
                let coeffs: Vec<BigRational> = l.coeffs.iter().zip(&u.coeffs).map(|(x, y)| x * &b + y * &a).collect();
                rest.push(Ineq { coeffs, constant: &l.constant * &b + &u.constant * &a, strict: l.strict || u.strict });
            }
        }
        stages.push(Stage { var, lower, upper });
        ineqs = rest;
        live.retain(|&v| v != var);
    }

    let mut x = vec![zero(); n];
    for st in stages.iter().rev() {
        let v = st.var;
        x[v] = zero();
        let bound = |q: &Ineq, x: &[BigRational]| {
            // a x_v + r >= 0 with x_v currently zero, so r = value
            let r = q.value(x);
            -r / &q.coeffs[v]
        };
        let lo = st.lower.iter().map(|q| (bound(q, &x), q.strict)).max_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        let hi = st.upper.iter().map(|q| (bound(q, &x), q.strict)).min_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let two = BigRational::from_integer(2.into());
        x[v] = match (lo, hi) {
            (Some((l, false)), _) => l,
            (Some((l, true)), Some((h, _))) => (l + h) / two,
            (Some((l, true)), None) => l + BigRational::one(),
            (None, Some((h, false))) => h,
            (None, Some((h, true))) => h - BigRational::one(),
            (None, None) => zero(),
        };
    }
    for (v, expr, konst) in subs.iter().rev() {
        x[*v] = expr.iter().zip(&x).filter(|(a, _)| !a.is_zero()).map(|(a, b)| a * b).sum::<BigRational>() + konst;
    }
    debug_assert!(p.check(&x));
    Ok(Some(x))
}
