//! The front-door graph `U -> X -> Z -> Y <- U`: concrete models, the
//! do-calculus constraints that hold in them, and the identification
//! formula for `P([x]y)`.

use std::fmt;

use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lang::{
    print_formula, FullFormula, Intervention, ProbFormula, PropFormula, Signature, Term, ValId, VarDecl, VarId,
};
use crate::scm::{EvalError, Scm};

pub const X: VarId = 0;
pub const Z: VarId = 1;
pub const Y: VarId = 2;

pub fn signature() -> Signature {
    Signature::binary(&["X", "Z", "Y"])
}

fn exo_decls() -> Vec<VarDecl> {
    ["U", "UX", "UZ", "UY"].iter().map(|n| VarDecl::new(*n, &["0", "1"])).collect()
}

/// Product distribution over four independent binary exogenous variables,
/// given `P(=1)` for each of `U, UX, UZ, UY`.
fn product_dist(p: &[BigRational; 4]) -> Vec<(Vec<ValId>, BigRational)> {
    (0..16usize)
        .map(|code| {
            let u: Vec<ValId> = (0..4).map(|k| (code >> k) & 1).collect();
            let w =
                u.iter().zip(p).fold(
                    BigRational::one(),
                    |acc, (&b, q)| {
                        if b == 1 {
                            acc * q
                        } else {
                            acc * (BigRational::one() - q)
                        }
                    },
                );
            (u, w)
        })
        .collect()
}

/// The conjunctive model with fair coins: `X = U & UX`, `Z = X & UZ`,
/// `Y = Z & U & UY`.
pub fn example2() -> Scm {
    let half = crate::rat(1, 2);
    let dist = product_dist(&[half.clone(), half.clone(), half.clone(), half]);
    Scm::from_fn(signature(), exo_decls(), dist, |v, e, u| match v {
        X => u[0] & u[1],
        Z => e[X] & u[2],
        _ => e[Z] & u[0] & u[3],
    })
    .expect("well-formed")
}

/// Exogenous weights `P(U=1), P(UX=1), P(UZ=1), P(UY=1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Weights(pub [BigRational; 4]);

impl Weights {
    /// Each weight is `k/d` with `2 <= d <= 12` and `0 < k < d`.
    pub fn random(seed: u64) -> Weights {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Weights(std::array::from_fn(|_| {
            let d = rng.gen_range(2..=12i64);
            crate::rat(rng.gen_range(1..d), d)
        }))
    }
}

/// Same graph as [`example2`] with every joint `(x, z)` reachable:
/// `X = U xor UX`, `Z = X xor UZ`, `Y = (Z & U) xor UY`.
pub fn demo_scm(w: &Weights) -> Scm {
    Scm::from_fn(signature(), exo_decls(), product_dist(&w.0), |v, e, u| match v {
        X => u[0] ^ u[1],
        Z => e[X] ^ u[2],
        _ => (e[Z] & u[0]) ^ u[3],
    })
    .expect("weights lie strictly inside (0, 1)")
}

fn bare(v: VarId, x: ValId) -> FullFormula {
    FullFormula::bare(PropFormula::assign(v, x))
}

fn boxed(i: &[(VarId, ValId)], v: VarId, x: ValId) -> FullFormula {
    FullFormula::boxed(Intervention::new(i.to_vec()).expect("distinct"), PropFormula::assign(v, x))
}

fn p(e: FullFormula) -> Term {
    Term::prob(e)
}

/// `P(y | x', z) P(x')` summed over `x'`, then weighted by `P(z | x)`.
pub fn eq2_rhs(x: ValId, y: ValId) -> Term {
    let inner =
        |z: ValId| {
            Term::sum_all((0..2).map(|xp| {
                Term::product(Term::cond(bare(Y, y), FullFormula::and(bare(X, xp), bare(Z, z))), p(bare(X, xp)))
            }))
            .unwrap()
        };
    Term::sum_all((0..2).map(|z| Term::product(Term::cond(bare(Z, z), bare(X, x)), inner(z)))).unwrap()
}

pub fn eq2_lhs(x: ValId, y: ValId) -> Term {
    p(boxed(&[(X, x)], Y, y))
}

/// `P([x]y) = sum_z P(z|x) sum_x' P(y|x',z) P(x')`.
pub fn eq2(x: ValId, y: ValId) -> ProbFormula {
    ProbFormula::eq(eq2_lhs(x, y), eq2_rhs(x, y))
}

/// The four front-door constraints over every value combination, each
/// labelled `i` to `iv`.
pub fn gamma() -> Vec<(&'static str, ProbFormula)> {
    let mut out = Vec::new();
    for x in 0..2 {
        for z in 0..2 {
            out.push(("i", ProbFormula::eq(p(boxed(&[(X, x)], Z, z)), Term::cond(bare(Z, z), bare(X, x)))));
        }
    }
    for z in 0..2 {
        for x in 0..2 {
            out.push(("ii", ProbFormula::eq(p(boxed(&[(Z, z)], X, x)), p(bare(X, x)))));
        }
    }
    for x in 0..2 {
        for z in 0..2 {
            for y in 0..2 {
                let both = p(boxed(&[(X, x), (Z, z)], Y, y));
                out.push((
                    "iii",
                    ProbFormula::and(
                        ProbFormula::eq(Term::cond(boxed(&[(X, x)], Y, y), boxed(&[(X, x)], Z, z)), both.clone()),
                        ProbFormula::eq(both, p(boxed(&[(Z, z)], Y, y))),
                    ),
                ));
            }
        }
    }
    for z in 0..2 {
        for y in 0..2 {
            for x in 0..2 {
                out.push((
                    "iv",
                    ProbFormula::eq(
                        Term::cond(boxed(&[(Z, z)], Y, y), boxed(&[(Z, z)], X, x)),
                        Term::cond(bare(Y, y), FullFormula::and(bare(X, x), bare(Z, z))),
                    ),
                ));
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct Eq2Row {
    pub x: ValId,
    pub y: ValId,
    pub lhs: BigRational,
    pub rhs: BigRational,
}

#[derive(Clone, Debug)]
pub struct DemoReport {
    pub seed: u64,
    pub weights: Weights,
    /// `(label, formula text, truth)` per constraint instance.
    pub gamma: Vec<GammaCheck>,
    pub eq2: Vec<Eq2Row>,
}

impl DemoReport {
    pub fn gamma_holds(&self) -> bool {
        self.gamma.iter().all(|g| g.2)
    }

    pub fn eq2_holds(&self) -> bool {
        self.eq2.iter().all(|r| r.lhs == r.rhs)
    }

    pub fn passed(&self) -> bool {
        self.gamma_holds() && self.eq2_holds()
    }
}

impl fmt::Display for DemoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = &self.weights.0;
        writeln!(f, "seed {}: P(U=1)={} P(UX=1)={} P(UZ=1)={} P(UY=1)={}", self.seed, w[0], w[1], w[2], w[3])?;
        for label in ["i", "ii", "iii", "iv"] {
            let rows: Vec<_> = self.gamma.iter().filter(|g| g.0 == label).collect();
            let ok = rows.iter().filter(|g| g.2).count();
            writeln!(f, "  ({label}) {ok}/{} instances true", rows.len())?;
            for g in rows.iter().filter(|g| !g.2) {
                writeln!(f, "      false: {}", g.1)?;
            }
        }
        for r in &self.eq2 {
            let mark = if r.lhs == r.rhs { "=" } else { "!=" };
            writeln!(f, "  P([X={}]Y={}) = {} {mark} {} (identification formula)", r.x, r.y, r.lhs, r.rhs)?;
        }
        write!(f, "  {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Constraint label, formula text, and whether it holds.
pub type GammaCheck = (&'static str, String, bool);

pub fn check_model(m: &Scm) -> Result<(Vec<GammaCheck>, Vec<Eq2Row>), EvalError> {
    let sig = m.sig().clone();
    let mut ev = m.evaluator();
    let mut g = Vec::new();
    for (label, phi) in gamma() {
        g.push((label, print_formula(&sig, &phi), ev.model_check(&phi)?));
    }
    let mut rows = Vec::new();
    for x in 0..2 {
        for y in 0..2 {
            rows.push(Eq2Row { x, y, lhs: ev.term_value(&eq2_lhs(x, y))?, rhs: ev.term_value(&eq2_rhs(x, y))? });
        }
    }
    Ok((g, rows))
}

pub fn demo(seed: u64) -> DemoReport {
    let weights = Weights::random(seed);
    let (gamma, eq2) = check_model(&demo_scm(&weights)).expect("recursive model");
    DemoReport { seed, weights, gamma, eq2 }
}

/// Premises and conclusion for deriving `P([x]y)` from observational
/// values of `m`. The premises are the front-door constraints with each
/// observational quantity replaced by its value in `m`, and conditionals
/// multiplied out, so every premise is linear.
pub fn entailment_instance(m: &Scm, x: ValId, y: ValId) -> Result<(Vec<ProbFormula>, ProbFormula), EvalError> {
    let mut ev = m.evaluator();
    let mut val = |t: Term| ev.term_value(&t).map(Term::constant);
    let mut gamma = Vec::new();
    for z in 0..2 {
        let cz = val(Term::cond(bare(Z, z), bare(X, x)))?;
        gamma.push(ProbFormula::eq(p(boxed(&[(X, x)], Z, z)), cz.clone()));
        let xz = p(boxed(&[(X, x), (Z, z)], Y, y));
        let joint = FullFormula::and(boxed(&[(X, x)], Y, y), boxed(&[(X, x)], Z, z));
        gamma.push(ProbFormula::eq(p(joint), Term::product(cz, xz.clone())));
        gamma.push(ProbFormula::eq(xz, p(boxed(&[(Z, z)], Y, y))));
        for xp in 0..2 {
            let cx = val(p(bare(X, xp)))?;
            gamma.push(ProbFormula::eq(p(boxed(&[(Z, z)], X, xp)), cx.clone()));
            let cy = val(Term::cond(bare(Y, y), FullFormula::and(bare(X, xp), bare(Z, z))))?;
            let joint = FullFormula::and(boxed(&[(Z, z)], Y, y), boxed(&[(Z, z)], X, xp));
            gamma.push(ProbFormula::eq(p(joint), Term::product(cy, cx)));
        }
    }
    let target = ev.term_value(&eq2_rhs(x, y))?;
    Ok((gamma, ProbFormula::eq(eq2_lhs(x, y), Term::constant(target))))
}
