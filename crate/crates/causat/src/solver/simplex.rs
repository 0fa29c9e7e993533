//! Two-phase primal simplex over exact rationals with Bland's rule.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::lp::{LinearProblem, Rel};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpResult {
    Optimal { x: Vec<BigRational>, value: BigRational },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<BigRational>>,
    obj: Vec<BigRational>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = BigRational::one() / &self.rows[r][c];
        for x in self.rows[r].iter_mut() {
            if !x.is_zero() {
                *x *= &inv;
            }
        }
        let prow = self.rows[r].clone();
        let nz: Vec<usize> = (0..=self.width).filter(|&j| !prow[j].is_zero()).collect();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for &j in &nz {
                row[j] -= &f * &prow[j];
            }
        }
        if !self.obj[c].is_zero() {
            let f = self.obj[c].clone();
            for &j in &nz {
                self.obj[j] -= &f * &prow[j];
            }
        }
        self.basis[r] = c;
    }

    fn set_objective(&mut self, c: &[BigRational]) {
        let mut obj: Vec<BigRational> = c.to_vec();
        obj.push(BigRational::zero());
        for (i, row) in self.rows.iter().enumerate() {
            let cb = &c[self.basis[i]];
            if cb.is_zero() {
                continue;
            }
            for (o, x) in obj.iter_mut().zip(row) {
                if !x.is_zero() {
                    *o -= cb * x;
                }
            }
        }
        self.obj = obj;
    }

    /// Maximize over allowed columns. `false` when unbounded.
    fn run(&mut self, allowed: &[bool]) -> bool {
        loop {
            let Some(c) = (0..self.width).find(|&j| allowed[j] && self.obj[j].is_positive()) else {
                return true;
            };
            let mut best: Option<(usize, BigRational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                let ratio = &row[self.width] / &row[c];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Maximize `c . x` subject to `a x = b`, `x >= 0`.
pub fn maximize(a: &[Vec<BigRational>], b: &[BigRational], c: &[BigRational]) -> LpResult {
    let m = a.len();
    let n = c.len();
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, (ai, bi)) in a.iter().zip(b).enumerate() {
        let flip = bi.is_negative();
        let mut row: Vec<BigRational> = ai.iter().map(|x| if flip { -x } else { x.clone() }).collect();
        row.resize(width, BigRational::zero());
        row[n + i] = BigRational::one();
        row.push(if flip { -bi } else { bi.clone() });
        rows.push(row);
    }
    let mut t = Tableau { rows, obj: Vec::new(), basis: (n..n + m).collect(), width };
    let mut phase1 = vec![BigRational::zero(); width];
    for x in &mut phase1[n..] {
        *x = -BigRational::one();
    }
    t.set_objective(&phase1);
    t.run(&vec![true; width]);
    if !t.obj[width].is_zero() {
        return LpResult::Infeasible;
    }
    // drive artificials out of the basis; drop rows that are redundant
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| !t.rows[i][j].is_zero()) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    let mut full = c.to_vec();
    full.resize(width, BigRational::zero());
    t.set_objective(&full);
    let allowed: Vec<bool> = (0..width).map(|j| j < n).collect();
    if !t.run(&allowed) {
        return LpResult::Unbounded;
    }
    let mut x = vec![BigRational::zero(); n];
    for (i, &bv) in t.basis.iter().enumerate() {
        if bv < n {
            x[bv] = t.rows[i][width].clone();
        }
    }
    LpResult::Optimal { value: -t.obj[width].clone(), x }
}

/// A point satisfying the problem, `None` if infeasible. Strict rows
/// share a slack `t` that is maximized; the system is strictly feasible
/// exactly when the optimum is positive.
pub fn solve_simplex(p: &LinearProblem) -> Option<Vec<BigRational>> {
    let n = p.n;
    let slacks = p.rows.iter().filter(|r| r.rel != Rel::Eq).count();
    let strict = p.rows.iter().any(|r| r.rel == Rel::Gt);
    // columns: x, row slacks, then t and its bound slack when strict
    let cols = n + slacks + if strict { 2 } else { 0 };
    let t_col = n + slacks;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for s in &p.simplices {
        let mut row = vec![BigRational::zero(); cols];
        for &i in s {
            row[i] = BigRational::one();
        }
        a.push(row);
        b.push(BigRational::one());
    }
    let mut k = n;
    for r in &p.rows {
        let mut row = vec![BigRational::zero(); cols];
        row[..n].clone_from_slice(&r.coeffs);
        match r.rel {
            Rel::Eq => {}
            Rel::Ge => {
                row[k] = -BigRational::one();
                k += 1;
            }
            Rel::Gt => {
                row[k] = -BigRational::one();
                row[t_col] = -BigRational::one();
                k += 1;
            }
        }
        a.push(row);
        b.push(-r.constant.clone());
    }
    let mut c = vec![BigRational::zero(); cols];
    if strict {
        let mut row = vec![BigRational::zero(); cols];
        row[t_col] = BigRational::one();
        row[t_col + 1] = BigRational::one();
        a.push(row);
        b.push(BigRational::one());
        c[t_col] = BigRational::one();
    }
    match maximize(&a, &b, &c) {
        LpResult::Optimal { x, value } => {
            if strict && !value.is_positive() {
                return None;
            }
            let x: Vec<BigRational> = x[..n].to_vec();
            debug_assert!(p.check(&x));
            Some(x)
        }
        LpResult::Infeasible => None,
        LpResult::Unbounded => unreachable!("objective bounded by the slack cap"),
    }
}
