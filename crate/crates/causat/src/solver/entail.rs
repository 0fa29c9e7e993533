//! Entailment as unsatisfiability of premises plus negated conclusion.

use super::ProbSolver;
use crate::lang::{ProbFormula, Signature};
use crate::reduction::{decide_causal_sat, DecideConfig, DecideError, Decision};
use crate::scm::Scm;

#[derive(Clone, Debug)]
pub enum Entailment {
    Entails,
    /// A model of the premises where the conclusion fails.
    Counterexample(Box<Scm>),
    Unknown(String),
}

pub fn check_entailment(
    sig: &Signature,
    gamma: &[ProbFormula],
    phi: &ProbFormula,
    solver: &dyn ProbSolver,
    cfg: &DecideConfig,
) -> Result<Entailment, DecideError> {
    let query = gamma.iter().cloned().rev().fold(ProbFormula::not(phi.clone()), |acc, g| ProbFormula::and(g, acc));
    Ok(match decide_causal_sat(sig, &query, solver, cfg)? {
        Decision::Sat(w, _) => Entailment::Counterexample(Box::new(w.model)),
        Decision::Unsat(_) => Entailment::Entails,
        Decision::Unknown { reason, .. } => Entailment::Unknown(reason),
    })
}
