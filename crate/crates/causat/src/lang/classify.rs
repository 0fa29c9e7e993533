use std::fmt;

use super::{ProbFormula, Term};

/// Arithmetic power of the terms in a formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arith {
    /// Bare `P(e)` comparisons.
    Comp,
    /// Sums of `P(e)`.
    Lin,
    /// Bare `P(e | e')` comparisons.
    Cond,
    /// Sums and products.
    Poly,
}

impl fmt::Display for Arith {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arith::Comp => "comp",
            Arith::Lin => "lin",
            Arith::Cond => "cond",
            Arith::Poly => "poly",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fragment {
    pub arithmetic: Arith,
    /// Some event carries a non-trivial intervention.
    pub causal: bool,
}

#[derive(Default)]
struct Shape {
    sum: bool,
    product: bool,
    cond: bool,
    cond_in_op: bool,
}

fn scan(t: &Term, under_op: bool, s: &mut Shape) {
    match t {
        Term::Prob(_) | Term::Const(_) => {}
        Term::CondProb(..) => {
            s.cond = true;
            s.cond_in_op |= under_op;
        }
        Term::Sum(a, b) => {
            s.sum = true;
            scan(a, true, s);
            scan(b, true, s);
        }
        Term::Product(a, b) => {
            s.product = true;
            scan(a, true, s);
            scan(b, true, s);
        }
    }
}

/// Least fragment containing `phi`. Rational constants are admitted in
/// every fragment; a conditional under `+` or `*` forces `poly`.
pub fn classify(phi: &ProbFormula) -> Fragment {
    let mut s = Shape::default();
    phi.visit_terms(&mut |t| scan(t, false, &mut s));
    let arithmetic = if s.product || s.cond_in_op || (s.sum && s.cond) {
        Arith::Poly
    } else if s.sum {
        Arith::Lin
    } else if s.cond {
        Arith::Cond
    } else {
        Arith::Comp
    };
    let mut causal = false;
    phi.visit_events(&mut |e| causal |= !e.is_pure());
    Fragment { arithmetic, causal }
}
