//! Multi-start local search for polynomial systems.
//!
//! Each restart fixes the selectors at random, draws a start point in the
//! box, and runs damped Gauss-Newton (Levenberg-Marquardt) on the
//! constraint violations, projecting back into the box after every step.
//! A converged point is rounded to nearby rationals and re-checked
//! exactly. The search never reports infeasibility.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::etr::{build_etr, EtrSystem, Rel, VarKind};
use super::poly::Poly;
use super::{ProbOutcome, ProbSolver, SolverError};
use crate::lang::{ProbFormula, Signature};

#[derive(Clone, Debug)]
pub struct NumericConfig {
    pub restarts: usize,
    pub seed: u64,
    /// Largest exact residual accepted.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig { restarts: 64, seed: 0, tolerance: 1e-9, max_iters: 400 }
    }
}

#[derive(Clone, Debug)]
pub struct NumericWitness {
    pub values: Vec<f64>,
    /// The rounded point the residual was checked at.
    pub rational: Vec<BigRational>,
    /// Largest exact constraint violation at `rational`.
    pub residual: f64,
    /// Restart that found it.
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub enum NumericOutcome {
    Sat(NumericWitness),
    Unknown(String),
}

/// Margin asked of strict inequalities during the search.
const STRICT_MARGIN: f64 = 1e-7;

/// Closest rational to `x` with `|x - p/q| <= eps`, by continued fractions.
pub fn rationalize(x: f64, eps: f64) -> BigRational {
    if !x.is_finite() {
        return BigRational::zero();
    }
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = BigInt::from(a as i64);
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let q = BigRational::new(h1.clone(), k1.clone());
        if (q.to_f64().unwrap_or(f64::NAN) - x).abs() <= eps {
            return q;
        }
        let frac = r - a;
        if frac.abs() < 1e-300 {
            break;
        }
        r = 1.0 / frac;
    }
    BigRational::from_float(x).unwrap_or_else(BigRational::zero)
}

fn violation(v: &BigRational, rel: Rel) -> Option<f64> {
    match rel {
        Rel::Eq => v.abs().to_f64(),
        Rel::Ge => Some(if v.is_negative() { (-v).to_f64()? } else { 0.0 }),
        // strict rows must hold exactly
        Rel::Gt => v.is_positive().then_some(0.0),
    }
}

/// Largest exact violation at `x`, `None` if a strict row or a bound fails.
pub fn exact_residual(sys: &EtrSystem, x: &[BigRational]) -> Option<f64> {
    for (v, x) in sys.vars.iter().zip(x) {
        let ok = match v.kind {
            VarKind::Prob | VarKind::CondAux => !x.is_negative() && *x <= BigRational::one(),
            VarKind::Selector { .. } => x.is_zero() || x.is_one(),
            VarKind::Free => true,
        };
        if !ok {
            return None;
        }
    }
    let mut worst = 0f64;
    for c in &sys.constraints {
        worst = worst.max(violation(&c.poly.eval(x), c.rel)?);
    }
    Some(worst)
}

/// Round to rationals, then make each probability block sum to one exactly.
pub fn round_point(sys: &EtrSystem, x: &[f64], eps: f64) -> Vec<BigRational> {
    let mut q: Vec<BigRational> = sys
        .vars
        .iter()
        .zip(x)
        .map(|(v, &x)| match v.kind {
            VarKind::Prob | VarKind::CondAux => rationalize(x.clamp(0.0, 1.0), eps),
            VarKind::Selector { .. } => {
                if x >= 0.5 {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }
            VarKind::Free => rationalize(x, eps),
        })
        .collect();
    for b in &sys.blocks {
        let Some(&big) = b.iter().max_by(|&&i, &&j| q[i].cmp(&q[j])) else { continue };
        let rest: BigRational = b.iter().filter(|&&i| i != big).map(|&i| q[i].clone()).sum();
        let fix = BigRational::one() - rest;
        if !fix.is_negative() {
            q[big] = fix;
        }
    }
    q
}

/// A constraint with its partial derivatives in the coordinates it mentions.
type LocalRow = (Poly, Rel, Vec<(usize, Poly)>);

struct Local {
    /// System variable behind each search coordinate.
    vars: Vec<usize>,
    rows: Vec<LocalRow>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Local {
    fn residuals(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|(p, rel, _)| {
                let v = p.eval_f64(x);
                match rel {
                    Rel::Eq => v,
                    Rel::Ge => v.min(0.0),
                    Rel::Gt => (v - STRICT_MARGIN).min(0.0),
                }
            }),
        )
    }

    fn jacobian(&self, x: &[f64], r: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.rows.len(), self.vars.len());
        for (i, (_, rel, grads)) in self.rows.iter().enumerate() {
            if *rel != Rel::Eq && r[i] == 0.0 {
                continue;
            }
            for (k, g) in grads {
                j[(i, *k)] = g.eval_f64(x);
            }
        }
        j
    }

    fn project(&self, x: &mut [f64]) {
        for (k, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[k], self.hi[k]);
        }
    }

    /// Levenberg-Marquardt from `x`; returns the final squared residual.
    fn run(&self, x: &mut Vec<f64>, iters: usize) -> f64 {
        let mut r = self.residuals(x);
        let mut cost = r.norm_squared();
        let mut lambda = 1e-3;
        let n = self.vars.len();
        for _ in 0..iters {
            if cost < 1e-30 {
                break;
            }
            let j = self.jacobian(x, &r);
            let jt = j.transpose();
            let jtj = &jt * &j;
            let g = &jt * &r;
            let mut improved = false;
            while lambda < 1e12 {
                let mut a = jtj.clone();
                for k in 0..n {
                    a[(k, k)] += lambda * (1.0 + jtj[(k, k)]);
                }
                let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                    lambda *= 10.0;
                    continue;
                };
                let mut y: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                self.project(&mut y);
                let ry = self.residuals(&y);
                let cy = ry.norm_squared();
                if cy < cost {
                    *x = y;
                    r = ry;
                    cost = cy;
                    lambda = (lambda / 3.0).max(1e-15);
                    improved = true;
                    break;
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
        cost
    }
}

fn restart(sys: &EtrSystem, cfg: &NumericConfig, seed: u64) -> Option<NumericWitness> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = sys.vars.len();
    let mut fixed: Vec<Option<f64>> = vec![None; m];
    for (i, v) in sys.vars.iter().enumerate() {
        if let VarKind::Selector { prefer } = v.kind {
            let bit = match prefer {
                Some(p) => {
                    if rng.gen_bool(0.85) {
                        p
                    } else {
                        !p
                    }
                }
                None => rng.gen_bool(0.5),
            };
            fixed[i] = Some(if bit { 1.0 } else { 0.0 });
        }
    }
    let exact = |i: usize| fixed[i].map(|b| if b > 0.5 { BigRational::one() } else { BigRational::zero() });
    let vars: Vec<usize> = (0..m).filter(|&i| fixed[i].is_none()).collect();
    let mut local_of = vec![usize::MAX; m];
    for (k, &v) in vars.iter().enumerate() {
        local_of[v] = k;
    }
    let mut rows = Vec::new();
    for c in &sys.constraints {
        let p = c.poly.substitute(&exact);
        if let Some(k) = p.as_constant() {
            let ok = match c.rel {
                Rel::Eq => k.is_zero(),
                Rel::Ge => !k.is_negative(),
                Rel::Gt => k.is_positive(),
            };
            if !ok {
                return None;
            }
            continue;
        }
        // renumber onto the search coordinates
        let mut q = Poly::zero();
        for (mono, coef) in p.terms() {
            let mut t = Poly::constant(coef.clone());
            for &(v, e) in mono {
                for _ in 0..e {
                    t = t.mul(&Poly::var(local_of[v]));
                }
            }
            q = q.add(&t);
        }
        let grads = q.vars().into_iter().map(|k| (k, q.derive(k))).collect();
        rows.push((q, c.rel, grads));
    }
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for &v in &vars {
        let (a, b) = match sys.vars[v].kind {
            VarKind::Free => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (0.0, 1.0),
        };
        lo.push(a);
        hi.push(b);
    }
    let local = Local { vars: vars.clone(), rows, lo, hi };
    let mut x = vec![0.0; vars.len()];
    for b in &sys.blocks {
        let w: Vec<f64> = b.iter().map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
        let s: f64 = w.iter().sum();
        for (&v, w) in b.iter().zip(w) {
            x[local_of[v]] = w / s;
        }
    }
    for (k, &v) in vars.iter().enumerate() {
        match sys.vars[v].kind {
            VarKind::CondAux => x[k] = rng.gen_range(0.0..1.0),
            VarKind::Free => x[k] = rng.gen_range(-2.0..2.0),
            _ => {}
        }
    }
    local.run(&mut x, cfg.max_iters);
    let mut full = vec![0.0; m];
    for i in 0..m {
        full[i] = match fixed[i] {
            Some(b) => b,
            None => x[local_of[i]],
        };
    }
    for eps in [1e-12, 1e-10] {
        let q = round_point(sys, &full, eps);
        if let Some(res) = exact_residual(sys, &q) {
            if res < cfg.tolerance {
                return Some(NumericWitness { values: full, rational: q, residual: res, seed });
            }
        }
    }
    None
}

/// Search for a point of `sys` whose exact residual is below tolerance.
/// Restarts run in parallel rounds; within a round the best by
/// `(residual, seed)` wins.
pub fn solve_etr_numeric(sys: &EtrSystem, cfg: &NumericConfig) -> NumericOutcome {
    let width = std::thread::available_parallelism().map_or(1, |n| n.get()).clamp(1, 8);
    let seeds: Vec<u64> =
        (0..cfg.restarts as u64).map(|k| cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add(k)).collect();
    for round in seeds.chunks(width) {
        let found: Vec<NumericWitness> = std::thread::scope(|s| {
            let hs: Vec<_> = round.iter().map(|&seed| s.spawn(move || restart(sys, cfg, seed))).collect();
            hs.into_iter().filter_map(|h| h.join().expect("restart panicked")).collect()
        });
        if let Some(best) = found.into_iter().min_by(|a, b| a.residual.total_cmp(&b.residual).then(a.seed.cmp(&b.seed)))
        {
            return NumericOutcome::Sat(best);
        }
    }
    NumericOutcome::Unknown(format!("no witness within {} restarts", cfg.restarts))
}

/// Numeric search, answering `Sat` only when some rounding of the
/// witness satisfies the formula exactly.
#[derive(Clone, Debug, Default)]
pub struct NumericSolver {
    pub config: NumericConfig,
}

impl ProbSolver for NumericSolver {
    fn name(&self) -> &str {
        "numeric"
    }

    fn solve_prob(&self, sig: &Signature, psi: &ProbFormula) -> Result<ProbOutcome, SolverError> {
        let sys = build_etr(sig, psi)?;
        let w = match solve_etr_numeric(&sys, &self.config) {
            NumericOutcome::Sat(w) => w,
            NumericOutcome::Unknown(why) => return Ok(ProbOutcome::Unknown(why)),
        };
        let mut tries = vec![w.rational.clone()];
        for eps in [1e-4, 1e-6, 1e-8] {
            tries.push(round_point(&sys, &w.values, eps));
        }
        for q in tries {
            let Some(m) = sys.measure(&q) else { continue };
            if matches!(m.satisfies(sig, psi), Ok(true)) {
                return Ok(ProbOutcome::Sat(m));
            }
        }
        Ok(ProbOutcome::Unknown(format!(
            "approximate witness (residual {:.3e}) has no exact rounding: {}",
            w.residual,
            sys.describe(sig, &w.values)
        )))
    }

    fn complete_for(&self, _: &ProbFormula) -> bool {
        false
    }
}
