//! One line per acceptance criterion: PASS, FAIL or SKIP, with timing.
//! Run with `cargo test -p causat --test acceptance -- --nocapture`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use causat::frontdoor;
use causat::lang::{
    parse_document, parse_formula, Arith, FullFormula, Intervention, ProbFormula, PropFormula, Signature, Term, VarDecl,
};
use causat::reduction::{decide_causal_sat, DecideConfig, Decision};
use causat::scm::{Scm, VariableOrder};
use causat::solver::{
    build_etr, emit_smtlib, encode_etr_inverse, planted_instance, run_external, solve_etr_numeric, EtrInverseInstance,
    LinearSolver, NumericConfig, NumericOutcome, SolverResponse,
};
use causat::statedesc::{check_compatibility, CompatibilityVerdict, DeltaContext, StateDescription};
use causat::{rat, BigRational};
use rand::Rng;

const M: &str = include_str!("../../../data/example4_m.json");
const M_PRIME: &str = include_str!("../../../data/example4_m_prime.json");
const EXAMPLE4: &str = include_str!("../../../data/example4.cau");
const SQRT2: &str = include_str!("../../../data/sqrt2.cau");

/// Absolute tolerance for floating point witnesses.
const TOL: f64 = 1e-6;

enum Status {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, format!("took {:.2?}, limit {:.0?}", elapsed, limit))
}

fn prob_term(sig: &Signature, text: &str) -> Term {
    match parse_formula(&format!("{text} >= 0"), sig).unwrap() {
        ProbFormula::Geq(t, _) => t,
        _ => unreachable!(),
    }
}

fn example4() -> Result<String, String> {
    let start = Instant::now();
    let m = Scm::from_json(M).map_err(|e| e.to_string())?;
    let mp = Scm::from_json(M_PRIME).map_err(|e| e.to_string())?;
    let sig = m.sig().clone();
    let t = prob_term(&sig, "P([V1=1] V2=1)");
    let (a, b) = (m.term_value(&t).unwrap(), mp.term_value(&t).unwrap());
    ensure(a == rat(1, 2), format!("M gives {a}"))?;
    ensure(b == rat(3, 4), format!("M' gives {b}"))?;
    let (_, fs) = parse_document(EXAMPLE4).map_err(|e| e.to_string())?;
    let phi = ProbFormula::and_all(fs).unwrap();
    ensure(m.model_check(&phi).unwrap(), "distinguishing formula false on M")?;
    ensure(!mp.model_check(&phi).unwrap(), "distinguishing formula true on M'")?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("1/2 on M, 3/4 on M', distinguishing formula true/false ({:.2?})", start.elapsed()))
}

/// A model whose single variable takes value `k` with probability `w[k]`.
fn point_model(names: &[&str], w: &[BigRational]) -> Scm {
    let sig = Signature::new(vec![VarDecl::new("V", names)]).unwrap();
    let labels: Vec<String> = (0..w.len()).map(|k| k.to_string()).collect();
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let exo = vec![VarDecl::new("U", &refs)];
    let dist = w.iter().enumerate().map(|(k, x)| (vec![k], x.clone())).collect();
    Scm::from_fn(sig, exo, dist, |_, _, u| u[0]).unwrap()
}

/// Every event over the values of variable 0, as a subset mask.
fn subset_events(k: usize) -> Vec<FullFormula> {
    let falsum = PropFormula::and(PropFormula::assign(0, 0), PropFormula::not(PropFormula::assign(0, 0)));
    (0..1usize << k)
        .map(|mask| {
            let p = (0..k)
                .filter(|v| mask >> v & 1 == 1)
                .map(|v| PropFormula::assign(0, v))
                .reduce(PropFormula::or)
                .unwrap_or_else(|| falsum.clone());
            FullFormula::bare(p)
        })
        .collect()
}

fn agree_on(models: [&Scm; 2], atoms: &[ProbFormula]) -> Result<usize, String> {
    for a in atoms {
        let (x, y) = (models[0].model_check(a).unwrap(), models[1].model_check(a).unwrap());
        ensure(x == y, format!("models differ on {}", causat::lang::print_formula(models[0].sig(), a)))?;
    }
    Ok(atoms.len())
}

fn expressivity() -> Result<String, String> {
    let start = Instant::now();
    // comp versus lin
    let m1 = point_model(&["0", "1"], &[rat(1, 3), rat(2, 3)]);
    let m2 = point_model(&["0", "1"], &[rat(2, 5), rat(3, 5)]);
    let ev = subset_events(2);
    let comp: Vec<ProbFormula> = ev
        .iter()
        .flat_map(|a| ev.iter().map(move |b| ProbFormula::geq(Term::prob(a.clone()), Term::prob(b.clone()))))
        .collect();
    let n_comp = agree_on([&m1, &m2], &comp)?;
    let sig = m1.sig().clone();
    let lin = parse_formula("P(V=1) = P(V=0) + P(V=0)", &sig).unwrap();
    ensure(m1.model_check(&lin).unwrap() && !m2.model_check(&lin).unwrap(), "lin atom does not separate")?;
    within(start.elapsed(), Duration::from_secs(1))?;

    // comp versus cond
    let start = Instant::now();
    let pqr = ["p", "q", "r"];
    let l1 = point_model(&pqr, &[rat(5, 9), rat(3, 9), rat(1, 9)]);
    let l2 = point_model(&pqr, &[rat(6, 9), rat(2, 9), rat(1, 9)]);
    let ev = subset_events(3);
    let comp: Vec<ProbFormula> = ev
        .iter()
        .flat_map(|a| ev.iter().map(move |b| ProbFormula::geq(Term::prob(a.clone()), Term::prob(b.clone()))))
        .collect();
    let n_luce = agree_on([&l1, &l2], &comp)?;
    let sig = l1.sig().clone();
    let chain = "P((V=p | (V=q | V=r))) > P((V=p | V=q)) & P((V=p | V=q)) > P((V=p | V=r)) & P((V=p | V=r)) > P(V=p) \
                 & P(V=p) > P((V=q | V=r)) & P((V=q | V=r)) > P(V=q) & P(V=q) > P(V=r) & P(V=r) > P(V=p & V=q)";
    let chain = parse_formula(chain, &sig).unwrap();
    ensure(l1.model_check(&chain).unwrap() && l2.model_check(&chain).unwrap(), "listed order fails")?;
    let lt = parse_formula("P(V=r | (V=q | V=r)) < P(V=q | (V=p | V=q))", &sig).unwrap();
    let gt = parse_formula("P(V=r | (V=q | V=r)) > P(V=q | (V=p | V=q))", &sig).unwrap();
    ensure(l1.model_check(&lt).unwrap() && !l1.model_check(&gt).unwrap(), "first measure direction")?;
    ensure(l2.model_check(&gt).unwrap() && !l2.model_check(&lt).unwrap(), "second measure direction")?;
    within(start.elapsed(), Duration::from_secs(1))?;

    // cond versus poly
    let start = Instant::now();
    let c1 = point_model(&pqr, &[rat(3, 20), rat(4, 20), rat(13, 20)]);
    let c2 = point_model(&pqr, &[rat(3, 20) - rat(3, 100), rat(4, 20) - rat(1, 100), rat(13, 20) + rat(4, 100)]);
    let conds: Vec<Term> = ev.iter().flat_map(|a| ev.iter().map(move |b| Term::cond(a.clone(), b.clone()))).collect();
    let cond: Vec<ProbFormula> =
        conds.iter().flat_map(|a| conds.iter().map(move |b| ProbFormula::geq(a.clone(), b.clone()))).collect();
    let n_cond = agree_on([&c1, &c2], &cond)?;
    let sig = c1.sig().clone();
    let less = parse_formula("P(V=r) * P(V=q) < P(V=p)", &sig).unwrap();
    let more = parse_formula("P(V=r) * P(V=q) > P(V=p)", &sig).unwrap();
    ensure(c1.model_check(&less).unwrap(), "first triple direction")?;
    ensure(c2.model_check(&more).unwrap(), "second triple direction")?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{n_comp} comp atoms, {n_luce} comp atoms, {n_cond} cond atoms agree; separating atoms differ"))
}

fn algorithm1() -> Result<String, String> {
    let iv = |p: &[(usize, usize)]| Intervention::new(p.to_vec()).unwrap();
    let ctx = Arc::new(DeltaContext::new(vec![iv(&[(0, 0)])], vec![0], vec![vec![0, 1]]).unwrap());
    let delta = StateDescription::new(ctx, vec![vec![1]]).unwrap();
    let v = check_compatibility(&delta, &VariableOrder::new(vec![0])).unwrap();
    ensure(v == CompatibilityVerdict::Unsatisfiable { var: 0, intervention: iv(&[(0, 0)]) }, format!("{v:?}"))?;

    let (a, b) = (iv(&[(0, 1), (3, 1)]), iv(&[(0, 1), (3, 0)]));
    let ctx = Arc::new(DeltaContext::new(vec![a.clone(), b.clone()], vec![0, 1, 2, 3], vec![vec![0, 1]; 4]).unwrap());
    let delta = StateDescription::new(ctx, vec![vec![1, 0, 1, 1], vec![1, 0, 0, 0]]).unwrap();
    let v = check_compatibility(&delta, &VariableOrder::new(vec![0, 1, 2, 3])).unwrap();
    ensure(v == CompatibilityVerdict::Incompatible { var: 2, first: a, second: b }, format!("{v:?}"))?;
    Ok("[V1=0]V1=1 unsatisfiable at V1; second description incompatible at V3".into())
}

fn all_interventions(n: usize) -> Vec<Intervention> {
    let mut out = Vec::new();
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let mut pairs = Vec::new();
        for v in 0..n {
            if c % 3 > 0 {
                pairs.push((v, c % 3 - 1));
            }
            c /= 3;
        }
        out.push(Intervention::new(pairs).unwrap());
    }
    out
}

fn validities() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = common::rng(4);
    let mut checks = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=4);
        let (m, _) = common::random_scm(&mut rng, n, k);
        let sig = m.sig().clone();
        let e1 = common::random_event(&mut rng, &sig, 2);
        let e2 = common::random_event(&mut rng, &sig, 2);
        let both = m.prob(&FullFormula::and(e1.clone(), e2.clone())).unwrap();
        let rest = m.prob(&FullFormula::and(e1.clone(), FullFormula::not(e2))).unwrap();
        ensure(both + rest == m.prob(&e1).unwrap(), "additivity fails")?;
        for i in all_interventions(n) {
            for v in 0..n {
                let total: BigRational =
                    (0..2).map(|x| m.prob(&FullFormula::boxed(i.clone(), PropFormula::assign(v, x))).unwrap()).sum();
                ensure(total == rat(1, 1), "definiteness fails")?;
                checks += 1;
            }
        }
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    for phi in common::recursion_validity(a, b) {
                        ensure(m.model_check(&phi).unwrap(), "recursion formula fails")?;
                        checks += 1;
                    }
                }
            }
        }
        checks += 1;
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("1000 models, {checks} exact checks ({:.2?})", start.elapsed()))
}

fn oracle_equivalence() -> Result<String, String> {
    let start = Instant::now();
    let corpus = common::oracle::causal_corpus(1, 200);
    let mut sat = 0;
    for (sig, phi) in &corpus {
        let text = causat::lang::print_formula(sig, phi);
        let oracle = common::oracle::find_model(sig, phi);
        match decide_causal_sat(sig, phi, &LinearSolver::default(), &DecideConfig::default())
            .map_err(|e| e.to_string())?
        {
            Decision::Sat(w, _) => {
                ensure(w.model.model_check(phi).unwrap(), format!("witness fails: {text}"))?;
                ensure(oracle.is_some(), format!("sat but oracle finds no model: {text}"))?;
                sat += 1;
            }
            Decision::Unsat(_) => ensure(oracle.is_none(), format!("unsat but oracle finds a model: {text}"))?,
            Decision::Unknown { reason, .. } => return Err(format!("unknown on {text}: {reason}")),
        }
    }
    within(start.elapsed(), Duration::from_secs(600))?;
    Ok(format!(
        "{} formulas, {sat} sat, {} unsat, all agree ({:.2?})",
        corpus.len(),
        corpus.len() - sat,
        start.elapsed()
    ))
}

fn front_door() -> Result<String, String> {
    let start = Instant::now();
    for seed in 0..100 {
        let r = frontdoor::demo(seed);
        ensure(r.gamma_holds() && r.eq2_holds(), format!("seed {seed}: {r}"))?;
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("100/100 seeds ({:.2?})", start.elapsed()))
}

fn sqrt2() -> Result<String, String> {
    let start = Instant::now();
    let (sig, fs) = parse_document(SQRT2).map_err(|e| e.to_string())?;
    let phi = ProbFormula::and_all(fs).unwrap();
    let sys = build_etr(&sig, &phi).map_err(|e| e.to_string())?;
    let w = match solve_etr_numeric(&sys, &NumericConfig::default()) {
        NumericOutcome::Sat(w) => w,
        NumericOutcome::Unknown(r) => return Err(r),
    };
    let b = match parse_formula("P(B=1) >= 0", &sig).unwrap() {
        ProbFormula::Geq(Term::Prob(e), _) => sys.probability(&e, &w.values).unwrap(),
        _ => unreachable!(),
    };
    ensure((b - std::f64::consts::FRAC_1_SQRT_2).abs() < TOL, format!("P(B=1) = {b}"))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("P(B=1) = {b:.10} ({:.2?})", start.elapsed()))
}

fn gadget() -> Status {
    let Some(cfg) = common::external_config() else {
        return Status::Skip("no external solver configured".into());
    };
    let run = || -> Result<String, String> {
        let start = Instant::now();
        let mut rng = common::rng(8);
        for t in 0..50 {
            let n = rng.gen_range(1..=4);
            let (inst, x) = planted_instance(&mut rng, n);
            ensure(inst.holds(&x), format!("instance {t}: planted witness fails"))?;
            let enc = encode_etr_inverse(&inst).map_err(|e| e.to_string())?;
            let c = causat::lang::classify(&enc.formula);
            let within_cond = matches!(c.arithmetic, Arith::Comp | Arith::Cond);
            ensure(within_cond && !c.causal, format!("instance {t}: fragment {c:?}"))?;
            let sys = build_etr(&enc.sig, &enc.formula).map_err(|e| e.to_string())?;
            match run_external(&emit_smtlib(&sys), &cfg).map_err(|e| e.to_string())? {
                SolverResponse::Sat(model) => {
                    let vals: Vec<f64> = sys
                        .vars
                        .iter()
                        .map(|v| model.iter().find(|(k, _)| *k == v.name).map_or(0.0, |(_, m)| m.to_f64()))
                        .collect();
                    let got = enc.decode(&|e| sys.probability(e, &vals).unwrap());
                    ensure(inst.violation(&got) < TOL, format!("instance {t}: decoded {got:?}"))?;
                }
                other => return Err(format!("instance {t}: {other:?}")),
            }
        }
        let bad = EtrInverseInstance { n: 1, plus: vec![(0, 0, 0)], inverse: vec![(0, 0)] };
        let enc = encode_etr_inverse(&bad).map_err(|e| e.to_string())?;
        let sys = build_etr(&enc.sig, &enc.formula).map_err(|e| e.to_string())?;
        let r = run_external(&emit_smtlib(&sys), &cfg).map_err(|e| e.to_string())?;
        ensure(r == SolverResponse::Unsat, format!("contradiction: {r:?}"))?;
        within(start.elapsed(), Duration::from_secs(300))?;
        Ok(format!("50 planted instances sat, contradiction unsat, via `{}` ({:.2?})", cfg.command, start.elapsed()))
    };
    match catch_unwind(AssertUnwindSafe(run)) {
        Ok(Ok(d)) => Status::Pass(d),
        Ok(Err(e)) => Status::Fail(e),
        Err(_) => Status::Fail("panicked".into()),
    }
}

fn status(f: impl FnOnce() -> Result<String, String>) -> Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(d)) => Status::Pass(d),
        Ok(Err(e)) => Status::Fail(e),
        Err(_) => Status::Fail("panicked".into()),
    }
}

#[test]
fn acceptance() {
    let mut results: Vec<(usize, &str, Status)> = vec![
        (1, "Example 4 reproduction", status(example4)),
        (2, "expressivity vectors", status(expressivity)),
        (3, "compatibility worked examples", status(algorithm1)),
        (4, "validity suites", status(validities)),
        (5, "reduction oracle equivalence", status(oracle_equivalence)),
        (6, "front-door demo", status(front_door)),
        (7, "inverse square root witness", status(sqrt2)),
        (8, "gadget round trip", gadget()),
    ];
    let nine = match (&results[4].2, &results[7].2) {
        (Status::Pass(_), Status::Pass(_)) => Status::Pass("both reduction directions exercised by 5 and 8".into()),
        (Status::Pass(_), Status::Skip(_)) => Status::Pass(
            "membership direction exercised by 5; hardness direction needs an external solver (8 skipped)".into(),
        ),
        _ => Status::Fail("depends on 5 and 8".into()),
    };
    results.push((9, "complexity results via constructive suites", nine));
    let mut failed = Vec::new();
    for (n, name, s) in &results {
        let (tag, detail) = match s {
            Status::Pass(d) => ("PASS", d),
            Status::Fail(d) => {
                failed.push(*n);
                ("FAIL", d)
            }
            Status::Skip(d) => ("SKIP", d),
        };
        println!("criterion {n} [{name}]: {tag}: {detail}");
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
