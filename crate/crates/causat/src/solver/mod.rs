//! Decision backends for purely probabilistic formulas.
//!
//! [`linear`] decides formulas whose terms are linear in probabilities
//! exactly. [`etr`] turns any formula into a polynomial system, which
//! [`numeric`] searches locally and [`smtlib`]/[`external`] hand to an
//! outside solver. [`gadget`] encodes the inverse-constrained real
//! problem as a conditional-probability formula.

use std::sync::Arc;

use num_rational::BigRational;
use thiserror::Error;

use crate::lang::{classify, ProbFormula, Signature};
use crate::scm::{EvalError, VariableOrder};
use crate::statedesc::{build_context, model_from_measure, DeltaContext, StateDescription};

pub mod atoms;
pub mod entail;
pub mod etr;
pub mod external;
pub mod fm;
pub mod gadget;
pub mod linear;
pub mod lp;
pub mod numeric;
pub mod poly;
pub mod simplex;
pub mod smtlib;

pub use atoms::{AtomError, Atomization, Columns};
pub use entail::{check_entailment, Entailment};
pub use etr::{build_etr, EtrSystem};
pub use external::{
    parse_solver_response, run_external, ExternalError, ExternalSolver, ModelValue, SolverConfig, SolverResponse,
};
pub use gadget::{encode_etr_inverse, planted_instance, Encoding, EtrInverseInstance};
pub use linear::{is_linear, solve_linear, LinearMethod, LinearSolver};
pub use numeric::{solve_etr_numeric, NumericConfig, NumericOutcome, NumericSolver, NumericWitness};
pub use smtlib::emit_smtlib;

/// A probability measure on the descriptions of a context.
#[derive(Clone, Debug)]
pub struct Measure {
    pub ctx: Arc<DeltaContext>,
    pub weights: Vec<(StateDescription, BigRational)>,
}

impl Measure {
    /// Whether the model built from this measure satisfies `psi`. The
    /// context must be the one [`build_context`] gives for `psi`.
    pub fn satisfies(&self, sig: &Signature, psi: &ProbFormula) -> Result<bool, SolverError> {
        let ord = VariableOrder::new(self.ctx.vars().to_vec());
        let m =
            model_from_measure(sig, &self.ctx, &ord, &self.weights).map_err(|e| SolverError::Witness(e.to_string()))?;
        Ok(m.model_check(psi)?)
    }
}

#[derive(Clone, Debug)]
pub enum ProbOutcome {
    /// A measure on the descriptions of `build_context(psi)` that
    /// satisfies `psi` exactly.
    Sat(Measure),
    Unsat,
    Unknown(String),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("formula is outside the backend's fragment: {0}")]
    Fragment(String),
    #[error("backend needs a purely probabilistic formula")]
    Causal,
    #[error("{0}")]
    Atoms(#[from] AtomError),
    #[error("{0}")]
    External(#[from] ExternalError),
    #[error("{0}")]
    Eval(#[from] EvalError),
    #[error("could not build a model from the solver's measure: {0}")]
    Witness(String),
}

/// Satisfiability for purely probabilistic formulas.
pub trait ProbSolver {
    fn name(&self) -> &str;

    fn solve_prob(&self, sig: &Signature, psi: &ProbFormula) -> Result<ProbOutcome, SolverError>;

    /// Whether an `Unsat` answer for `psi` is trustworthy. Only the shape
    /// of the terms matters, so a causal formula may be passed in place of
    /// its reduction.
    fn complete_for(&self, psi: &ProbFormula) -> bool;
}

/// Pick linear when the formula linearizes, else the external solver when
/// one is configured, else numeric search.
pub struct AutoSolver {
    pub linear: LinearSolver,
    pub numeric: NumericSolver,
    pub external: Option<ExternalSolver>,
}

impl AutoSolver {
    fn pick(&self, psi: &ProbFormula) -> &dyn ProbSolver {
        if linear::is_linear(psi) {
            return &self.linear;
        }
        match &self.external {
            Some(e) => e,
            None => &self.numeric,
        }
    }
}

impl ProbSolver for AutoSolver {
    fn name(&self) -> &str {
        "auto"
    }

    fn solve_prob(&self, sig: &Signature, psi: &ProbFormula) -> Result<ProbOutcome, SolverError> {
        self.pick(psi).solve_prob(sig, psi)
    }

    fn complete_for(&self, psi: &ProbFormula) -> bool {
        linear::is_linear(psi) || self.external.is_some()
    }
}

/// Context a solver's measure lives in.
pub fn measure_context(sig: &Signature, psi: &ProbFormula) -> Result<Arc<DeltaContext>, SolverError> {
    if !classify(psi).causal {
        Ok(Arc::new(build_context(sig, psi)))
    } else {
        Err(SolverError::Causal)
    }
}
