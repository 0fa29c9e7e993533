//! Conjunctive linear systems over probability simplices.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rel {
    Ge,
    Gt,
    Eq,
}

/// `coeffs . x + constant  rel  0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Row {
    pub coeffs: Vec<BigRational>,
    pub constant: BigRational,
    pub rel: Rel,
}

impl Row {
    pub fn holds(&self, x: &[BigRational]) -> bool {
        let v: BigRational =
            self.coeffs.iter().zip(x).filter(|(a, _)| !a.is_zero()).map(|(a, b)| a * b).sum::<BigRational>()
                + &self.constant;
        match self.rel {
            Rel::Ge => !v.is_negative(),
            Rel::Gt => v.is_positive(),
            Rel::Eq => v.is_zero(),
        }
    }
}

/// Unknowns `x_0..x_{n-1}`, all nonnegative, each simplex summing to one,
/// plus the rows.
#[derive(Clone, Debug, Default)]
pub struct LinearProblem {
    pub n: usize,
    pub simplices: Vec<Vec<usize>>,
    pub rows: Vec<Row>,
}

impl LinearProblem {
    /// Exact check of a candidate point.
    pub fn check(&self, x: &[BigRational]) -> bool {
        x.len() == self.n
            && x.iter().all(|v| !v.is_negative())
            && self.simplices.iter().all(|s| s.iter().map(|&i| &x[i]).sum::<BigRational>().is_one())
            && self.rows.iter().all(|r| r.holds(x))
    }
}
