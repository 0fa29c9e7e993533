#![allow(dead_code)]

pub mod oracle;

use causat::lang::{FullFormula, Intervention, ProbFormula, PropFormula, Signature, Term, ValId, VarDecl, VarId};
use causat::scm::{Scm, VariableOrder};
use causat::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NAMES: [&str; 4] = ["A", "B", "C", "D"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn binary_sig(n: usize) -> Signature {
    Signature::binary(&NAMES[..n])
}

/// Weights `w_k / sum` from small random integers, at least one positive.
pub fn random_dist(rng: &mut impl Rng, states: usize) -> Vec<(Vec<ValId>, BigRational)> {
    let mut w: Vec<i64> = (0..states).map(|_| rng.gen_range(0..5)).collect();
    if w.iter().all(|&x| x == 0) {
        w[rng.gen_range(0..states)] = 1;
    }
    let total: i64 = w.iter().sum();
    w.iter().enumerate().map(|(u, &x)| (vec![u], causat::rat(x, total))).collect()
}

/// A recursive model over `n` binary variables with one exogenous variable
/// of `states` values. Each function reads only variables earlier in a
/// random order, through a random table.
pub fn random_scm(rng: &mut impl Rng, n: usize, states: usize) -> (Scm, VariableOrder) {
    let mut order: Vec<VarId> = (0..n).collect();
    order.shuffle(rng);
    let tables: Vec<Vec<ValId>> = (0..n)
        .map(|v| {
            let rank = order.iter().position(|&w| w == v).unwrap();
            (0..(states << rank)).map(|_| rng.gen_range(0..2)).collect()
        })
        .collect();
    let exo = vec![VarDecl { name: "U".into(), domain: (0..states).map(|k| k.to_string()).collect() }];
    let dist = random_dist(rng, states);
    let ord = order.clone();
    let m = Scm::from_fn(binary_sig(n), exo, dist, move |v, e, u| {
        let rank = ord.iter().position(|&w| w == v).unwrap();
        let key = ord[..rank].iter().fold(0, |acc, &w| acc * 2 + e[w]);
        tables[v][key * states + u[0]]
    })
    .unwrap();
    (m, VariableOrder::new(order))
}

pub fn random_prop(rng: &mut impl Rng, sig: &Signature, depth: u32) -> PropFormula {
    if depth == 0 {
        return random_literal(rng, sig);
    }
    match rng.gen_range(0..4) {
        0 => PropFormula::not(random_prop(rng, sig, depth - 1)),
        1 => PropFormula::and(random_prop(rng, sig, depth - 1), random_prop(rng, sig, depth - 1)),
        2 => PropFormula::or(random_prop(rng, sig, depth - 1), random_prop(rng, sig, depth - 1)),
        _ => random_literal(rng, sig),
    }
}

pub fn random_literal(rng: &mut impl Rng, sig: &Signature) -> PropFormula {
    let v = rng.gen_range(0..sig.len());
    PropFormula::assign(v, rng.gen_range(0..sig.domain_size(v)))
}

/// Each variable is left alone or set, with probability `p_set` of setting.
pub fn random_intervention(rng: &mut impl Rng, sig: &Signature, p_set: f64) -> Intervention {
    let mut pairs = Vec::new();
    for v in 0..sig.len() {
        if rng.gen_bool(p_set) {
            pairs.push((v, rng.gen_range(0..sig.domain_size(v))));
        }
    }
    Intervention::new(pairs).unwrap()
}

pub fn random_event(rng: &mut impl Rng, sig: &Signature, depth: u32) -> FullFormula {
    if depth == 0 || rng.gen_bool(0.4) {
        let i = random_intervention(rng, sig, 0.3);
        return FullFormula::boxed(i, random_prop(rng, sig, depth.min(2)));
    }
    match rng.gen_range(0..3) {
        0 => FullFormula::not(random_event(rng, sig, depth - 1)),
        1 => FullFormula::and(random_event(rng, sig, depth - 1), random_event(rng, sig, depth - 1)),
        _ => FullFormula::or(random_event(rng, sig, depth - 1), random_event(rng, sig, depth - 1)),
    }
}

pub fn random_const(rng: &mut impl Rng) -> Term {
    let d = rng.gen_range(1..8);
    Term::ratio(rng.gen_range(0..=2 * d), d)
}

/// Terms of every shape: probabilities, conditionals, sums, products and
/// constants.
pub fn random_term(rng: &mut impl Rng, sig: &Signature, depth: u32) -> Term {
    if depth == 0 {
        return match rng.gen_range(0..4) {
            0 => random_const(rng),
            1 => Term::cond(random_event(rng, sig, 1), random_event(rng, sig, 1)),
            _ => Term::prob(random_event(rng, sig, 2)),
        };
    }
    match rng.gen_range(0..4) {
        0 => Term::sum(random_term(rng, sig, depth - 1), random_term(rng, sig, depth - 1)),
        1 => Term::product(random_term(rng, sig, depth - 1), random_term(rng, sig, depth - 1)),
        _ => random_term(rng, sig, 0),
    }
}

pub fn random_formula(rng: &mut impl Rng, sig: &Signature, depth: u32, term_depth: u32) -> ProbFormula {
    if depth == 0 || rng.gen_bool(0.3) {
        let a = random_term(rng, sig, term_depth);
        let b = random_term(rng, sig, term_depth);
        return match rng.gen_range(0..5) {
            0 => ProbFormula::eq(a, b),
            1 => ProbFormula::gt(a, b),
            2 => ProbFormula::le(a, b),
            3 => ProbFormula::lt(a, b),
            _ => ProbFormula::geq(a, b),
        };
    }
    match rng.gen_range(0..3) {
        0 => ProbFormula::not(random_formula(rng, sig, depth - 1, term_depth)),
        1 => ProbFormula::and(
            random_formula(rng, sig, depth - 1, term_depth),
            random_formula(rng, sig, depth - 1, term_depth),
        ),
        _ => ProbFormula::or(
            random_formula(rng, sig, depth - 1, term_depth),
            random_formula(rng, sig, depth - 1, term_depth),
        ),
    }
}

/// Purely probabilistic `lin` formula with optional constants.
pub fn random_lin_formula(rng: &mut impl Rng, sig: &Signature, atoms: usize, constants: bool) -> ProbFormula {
    let side = |rng: &mut ChaCha8Rng| {
        let k = rng.gen_range(1..=2);
        let mut parts: Vec<Term> = (0..k).map(|_| Term::prob(FullFormula::bare(random_prop(rng, sig, 1)))).collect();
        if constants && rng.gen_bool(0.4) {
            parts.push(Term::ratio(rng.gen_range(1..4), rng.gen_range(2..6)));
        }
        Term::sum_all(parts).unwrap()
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut fs = Vec::new();
    for _ in 0..atoms {
        let a = side(&mut local);
        let b = side(&mut local);
        let atom = match local.gen_range(0..4) {
            0 => ProbFormula::eq(a, b),
            1 => ProbFormula::gt(a, b),
            _ => ProbFormula::geq(a, b),
        };
        fs.push(if local.gen_bool(0.25) { ProbFormula::not(atom) } else { atom });
    }
    let mut it = fs.into_iter();
    let first = it.next().unwrap();
    it.fold(first, |acc, f| if local.gen_bool(0.7) { ProbFormula::and(acc, f) } else { ProbFormula::or(acc, f) })
}

/// The configured external solver, else a `z3` found on `PATH`.
pub fn external_config() -> Option<causat::solver::SolverConfig> {
    if let Ok(Some(c)) = causat::solver::SolverConfig::resolve(None, None) {
        return Some(c);
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join("z3"))
        .find(|p| p.is_file())
        .map(|p| causat::solver::SolverConfig::new(format!("{} -smt2", p.display())))
}

fn box_assign(v: VarId, x: ValId, w: VarId, y: ValId) -> FullFormula {
    FullFormula::boxed(Intervention::single(v, x), PropFormula::assign(w, y))
}

/// `P([X=x] Y=y & [X=x'] Y=y') > 0 -> P([Y=y] X=x & [Y=y'] X=x') = 0` for
/// distinct `x, x'` and distinct `y, y'`.
pub fn recursion_validity(a: usize, b: usize) -> Vec<ProbFormula> {
    let mut out = Vec::new();
    for (x, xp) in [(0, 1), (1, 0)] {
        for (y, yp) in [(0, 1), (1, 0)] {
            let fwd = FullFormula::and(box_assign(a, x, b, y), box_assign(a, xp, b, yp));
            let back = FullFormula::and(box_assign(b, y, a, x), box_assign(b, yp, a, xp));
            out.push(ProbFormula::implies(
                ProbFormula::gt(Term::prob(fwd), Term::ratio(0, 1)),
                ProbFormula::eq(Term::prob(back), Term::ratio(0, 1)),
            ));
        }
    }
    out
}
