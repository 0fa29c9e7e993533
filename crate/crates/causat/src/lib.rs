//! Satisfiability and model checking for probabilistic and causal
//! formulas over finite structural causal models.
//!
//! The pipeline runs from text ([`lang`]) through exact semantics
//! ([`scm`]), state descriptions ([`statedesc`]), the causal-to-
//! probabilistic reduction ([`reduction`]) and the decision backends
//! ([`solver`]).

pub mod frontdoor;
pub mod lang;
pub mod reduction;
pub mod scm;
pub mod solver;
pub mod statedesc;

pub use num_bigint::BigInt;
pub use num_rational::BigRational;

/// `n/d` as an exact rational.
pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}
