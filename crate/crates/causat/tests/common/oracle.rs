//! Brute-force satisfiability over small causal signatures: mixtures of
//! deterministic recursive models with grid weights, confirmed by
//! model checking the assembled mixture.

use std::collections::HashMap;

use causat::lang::{FullFormula, Intervention, ProbFormula, PropFormula, Signature, Term, ValId, VarDecl, VarId};
use causat::scm::{Scm, VariableOrder};
use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};

/// Grid resolution for mixture weights.
pub const GRID: i64 = 12;
/// Most deterministic models mixed at once.
pub const MAX_SUPPORT: usize = 4;

/// Deterministic binary model: per variable in `ord`, a truth table over
/// the earlier variables.
#[derive(Clone, Debug)]
struct Det {
    ord: Vec<VarId>,
    tables: Vec<u32>,
}

impl Det {
    fn run(&self, i: &Intervention) -> Vec<ValId> {
        let mut val = vec![0; self.ord.len()];
        for (r, &v) in self.ord.iter().enumerate() {
            val[v] = match i.get(v) {
                Some(x) => x,
                None => {
                    let key = self.ord[..r].iter().fold(0, |acc, &w| acc * 2 + val[w]);
                    ((self.tables[r] >> key) & 1) as ValId
                }
            };
        }
        val
    }

    fn holds(&self, e: &FullFormula) -> bool {
        match e {
            FullFormula::Box(i, p) => prop(p, &self.run(i)),
            FullFormula::Not(x) => !self.holds(x),
            FullFormula::And(a, b) => self.holds(a) && self.holds(b),
        }
    }

    fn value(&self, v: VarId, others: &[ValId]) -> ValId {
        let r = self.ord.iter().position(|&w| w == v).unwrap();
        let key = self.ord[..r].iter().fold(0, |acc, &w| acc * 2 + others[w]);
        ((self.tables[r] >> key) & 1) as ValId
    }
}

fn prop(p: &PropFormula, val: &[ValId]) -> bool {
    match p {
        PropFormula::Assign(v, x) => val[*v] == *x,
        PropFormula::Not(q) => !prop(q, val),
        PropFormula::And(a, b) => prop(a, val) && prop(b, val),
    }
}

fn deterministic_models(ord: &[VarId]) -> Vec<Det> {
    let sizes: Vec<u32> = (0..ord.len()).map(|r| 1u32 << (1u32 << r)).collect();
    let total: u32 = sizes.iter().product();
    (0..total)
        .map(|code| {
            let mut c = code;
            let tables = sizes
                .iter()
                .map(|&s| {
                    let t = c % s;
                    c /= s;
                    t
                })
                .collect();
            Det { ord: ord.to_vec(), tables }
        })
        .collect()
}

fn to_small(q: &causat::BigRational) -> Rational64 {
    Rational64::new(q.numer().to_i64().unwrap(), q.denom().to_i64().unwrap())
}

fn term(t: &Term, prob: &impl Fn(&FullFormula) -> Rational64) -> Rational64 {
    match t {
        Term::Const(c) => to_small(c),
        Term::Prob(e) => prob(e),
        Term::CondProb(e, g) => {
            let pg = prob(g);
            if pg.is_zero() {
                Rational64::one()
            } else {
                prob(&FullFormula::and(e.clone(), g.clone())) / pg
            }
        }
        Term::Sum(a, b) => term(a, prob) + term(b, prob),
        Term::Product(a, b) => term(a, prob) * term(b, prob),
    }
}

fn formula(f: &ProbFormula, prob: &impl Fn(&FullFormula) -> Rational64) -> bool {
    match f {
        ProbFormula::Geq(a, b) => term(a, prob) >= term(b, prob),
        ProbFormula::Not(g) => !formula(g, prob),
        ProbFormula::And(a, b) => formula(a, prob) && formula(b, prob),
    }
}

/// Compositions of `total` into `parts` positive integers.
fn compositions(total: i64, parts: usize, out: &mut Vec<Vec<i64>>, cur: &mut Vec<i64>) {
    if parts == 1 {
        cur.push(total);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for x in 1..=total - (parts as i64 - 1) {
        cur.push(x);
        compositions(total - x, parts - 1, out, cur);
        cur.pop();
    }
}

fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        subsets(n, k, i + 1, cur, out);
        cur.pop();
    }
}

/// The mixture as a model with one exogenous variable over its components.
fn assemble(sig: &Signature, parts: &[(Det, i64)]) -> Scm {
    let exo = vec![VarDecl { name: "U".into(), domain: (0..parts.len()).map(|k| k.to_string()).collect() }];
    let total: i64 = parts.iter().map(|p| p.1).sum();
    let dist = parts.iter().enumerate().map(|(k, p)| (vec![k], causat::rat(p.1, total))).collect();
    Scm::from_fn(sig.clone(), exo, dist, |v, e, u| parts[u[0]].0.value(v, e)).unwrap()
}

/// A model of `phi` among grid mixtures, if one exists. The returned model
/// has been model checked.
pub fn find_model(sig: &Signature, phi: &ProbFormula) -> Option<Scm> {
    let events: Vec<FullFormula> = phi.events().into_iter().cloned().collect();
    let mut comps: HashMap<usize, Vec<Vec<i64>>> = HashMap::new();
    let support = MAX_SUPPORT.min(phi.size());
    let vars: Vec<VarId> = (0..sig.len()).collect();
    for ord in VariableOrder::all(&vars) {
        let dets = deterministic_models(ord.vars());
        let truth: Vec<Vec<bool>> = dets.iter().map(|d| events.iter().map(|e| d.holds(e)).collect()).collect();
        for k in 1..=support.min(dets.len()) {
            let ws = comps.entry(k).or_insert_with(|| {
                let mut out = Vec::new();
                compositions(GRID, k, &mut out, &mut Vec::new());
                out
            });
            let mut picks = Vec::new();
            subsets(dets.len(), k, 0, &mut Vec::new(), &mut picks);
            for pick in &picks {
                for w in ws.iter() {
                    let prob = |e: &FullFormula| {
                        let idx = events.iter().position(|x| x == e);
                        let num: i64 = pick
                            .iter()
                            .zip(w)
                            .filter(|(&m, _)| match idx {
                                Some(j) => truth[m][j],
                                None => dets[m].holds(e),
                            })
                            .map(|(_, &x)| x)
                            .sum();
                        Rational64::new(num, GRID)
                    };
                    if formula(phi, &prob) {
                        let parts: Vec<(Det, i64)> = pick.iter().zip(w).map(|(&m, &x)| (dets[m].clone(), x)).collect();
                        let m = assemble(sig, &parts);
                        assert!(m.model_check(phi).unwrap(), "oracle mixture fails model checking");
                        return Some(m);
                    }
                }
            }
        }
    }
    None
}

fn literal(rng: &mut impl rand::Rng, n: usize) -> PropFormula {
    let v = rng.gen_range(0..n);
    let a = PropFormula::assign(v, rng.gen_range(0..2));
    if rng.gen_bool(0.25) {
        PropFormula::not(a)
    } else {
        a
    }
}

fn corpus_box(rng: &mut impl rand::Rng, n: usize, pool: &[Intervention]) -> FullFormula {
    let i = pool[rng.gen_range(0..pool.len())].clone();
    let body = if n > 1 && rng.gen_bool(0.3) {
        PropFormula::and(PropFormula::assign(0, rng.gen_range(0..2)), PropFormula::assign(1, rng.gen_range(0..2)))
    } else {
        literal(rng, n)
    };
    FullFormula::boxed(i, body)
}

fn corpus_event(rng: &mut impl rand::Rng, n: usize, pool: &[Intervention]) -> FullFormula {
    let first = corpus_box(rng, n, pool);
    match rng.gen_range(0..5) {
        0 => FullFormula::and(first, corpus_box(rng, n, pool)),
        1 => FullFormula::or(first, corpus_box(rng, n, pool)),
        _ => first,
    }
}

fn corpus_term(rng: &mut impl rand::Rng, n: usize, pool: &[Intervention]) -> Term {
    match rng.gen_range(0..8) {
        0 => {
            let (a, b) = [(0, 1), (1, 2), (1, 3), (1, 4), (1, 1), (2, 3)][rng.gen_range(0..6)];
            Term::ratio(a, b)
        }
        1 => Term::sum(Term::prob(corpus_event(rng, n, pool)), Term::prob(corpus_event(rng, n, pool))),
        _ => Term::prob(corpus_event(rng, n, pool)),
    }
}

/// Causal `comp`/`lin` formulas over one or two binary variables, each
/// using at most two non-trivial interventions.
pub fn causal_corpus(seed: u64, count: usize) -> Vec<(Signature, ProbFormula)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let names = ["X", "Y"];
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = if rng.gen_bool(0.2) { 1 } else { 2 };
        let sig = Signature::binary(&names[..n]);
        let mut pool = vec![Intervention::trivial()];
        while pool.len() < 3 {
            let v = rng.gen_range(0..n);
            let mut pairs = vec![(v, rng.gen_range(0..2))];
            if n == 2 && rng.gen_bool(0.2) {
                pairs.push((1 - v, rng.gen_range(0..2)));
            }
            let i = Intervention::new(pairs).unwrap();
            if !pool.contains(&i) {
                pool.push(i);
            }
            if n == 1 && pool.len() == 3 {
                break;
            }
        }
        let atoms = rng.gen_range(1..=3);
        let mut parts = Vec::new();
        for _ in 0..atoms {
            let a = corpus_term(&mut rng, n, &pool);
            let b = corpus_term(&mut rng, n, &pool);
            let atom = match rng.gen_range(0..3) {
                0 => ProbFormula::geq(a, b),
                1 => ProbFormula::gt(a, b),
                _ => ProbFormula::eq(a, b),
            };
            parts.push(if rng.gen_bool(0.2) { ProbFormula::not(atom) } else { atom });
        }
        let phi = parts
            .into_iter()
            .reduce(|acc, f| if rng.gen_bool(0.75) { ProbFormula::and(acc, f) } else { ProbFormula::or(acc, f) })
            .unwrap();
        if causat::lang::classify(&phi).causal {
            out.push((sig, phi));
        }
    }
    out
}
