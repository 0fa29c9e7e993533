mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use causat::lang::{parse_formula, FullFormula, Intervention, PropFormula, Signature, ValId, VarId};
use causat::rat;
use causat::scm::VariableOrder;
use causat::statedesc::{
    build_context, check_compatibility, compatible_descriptions, entails, iterate_descriptions, model_from_measure,
    CompatibilityVerdict, CoverageError, DeltaContext, MeasureError, StateDescription,
};
use causat::BigRational;
use num_traits::One;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn xy() -> Signature {
    Signature::binary(&["X", "Y"])
}

fn full_context(n: usize, interventions: Vec<Intervention>) -> Arc<DeltaContext> {
    Arc::new(DeltaContext::new(interventions, (0..n).collect(), vec![vec![0, 1]; n]).unwrap())
}

fn iv(pairs: &[(VarId, ValId)]) -> Intervention {
    Intervention::new(pairs.to_vec()).unwrap()
}

#[test]
fn context_of_single_box() {
    let sig = xy();
    let phi = parse_formula("P([X=1] Y=1) > 0", &sig).unwrap();
    let ctx = build_context(&sig, &phi);
    assert_eq!(ctx.interventions(), &[Intervention::trivial(), Intervention::single(0, 1)]);
    assert_eq!(ctx.vars(), &[0, 1]);
    assert_eq!(ctx.assignments(0), &[0, 1]);
    assert_eq!(ctx.assignments(1), &[0, 1]);
    assert_eq!(ctx.fresh(0), Some(0));
    assert_eq!(ctx.fresh(1), Some(0));
    assert_eq!(ctx.count(), Some(16));

    let both = parse_formula("P(X=1) > P(X=0)", &sig).unwrap();
    let ctx = build_context(&sig, &both);
    assert_eq!(ctx.fresh(0), None);
    assert_eq!(ctx.assignments(0), &[0, 1]);
    assert_eq!(ctx.interventions(), &[Intervention::trivial()]);

    let tri = Signature::new(vec![causat::lang::VarDecl::new("V", &["a", "b", "c", "d"])]).unwrap();
    let phi = parse_formula("P(V=c) > P(V=a)", &tri).unwrap();
    let ctx = build_context(&tri, &phi);
    assert_eq!(ctx.assignments(0), &[0, 1, 2]);
    assert_eq!(ctx.fresh(0), Some(1));
}

#[test]
fn description_stream_is_lexicographic_and_complete() {
    let sig = xy();
    let phi = parse_formula("P([X=1] Y=1) > 0", &sig).unwrap();
    let ctx = Arc::new(build_context(&sig, &phi));
    let all: Vec<StateDescription> = iterate_descriptions(&ctx).collect();
    assert_eq!(all.len() as u128, ctx.count().unwrap());
    assert!(all[0].table().iter().all(|&x| x == 0));
    assert!(all.windows(2).all(|w| w[0] < w[1]));
    let again: Vec<StateDescription> = iterate_descriptions(&ctx).collect();
    assert_eq!(all, again);
    assert_eq!(iterate_descriptions(&ctx).take(3).count(), 3);
}

#[test]
fn intervened_value_clash_is_unsatisfiable() {
    let ctx = Arc::new(DeltaContext::new(vec![iv(&[(0, 0)])], vec![0], vec![vec![0, 1]]).unwrap());
    let delta = StateDescription::new(ctx, vec![vec![1]]).unwrap();
    let verdict = check_compatibility(&delta, &VariableOrder::new(vec![0])).unwrap();
    assert_eq!(verdict, CompatibilityVerdict::Unsatisfiable { var: 0, intervention: iv(&[(0, 0)]) });
}

#[test]
fn agreement_clash_is_incompatible_at_third_variable() {
    let a = iv(&[(0, 1), (3, 1)]);
    let b = iv(&[(0, 1), (3, 0)]);
    let ctx = full_context(4, vec![a.clone(), b.clone()]);
    let delta = StateDescription::new(ctx, vec![vec![1, 0, 1, 1], vec![1, 0, 0, 0]]).unwrap();
    let verdict = check_compatibility(&delta, &VariableOrder::new(vec![0, 1, 2, 3])).unwrap();
    assert_eq!(verdict, CompatibilityVerdict::Incompatible { var: 2, first: a, second: b });
    // with V4 first, the two rows already differ before V3
    let verdict = check_compatibility(&delta, &VariableOrder::new(vec![3, 0, 1, 2])).unwrap();
    assert!(verdict.is_compatible());
}

#[test]
fn fully_fixed_rows_are_compatible() {
    let ctx = full_context(2, vec![iv(&[(0, 0), (1, 1)]), iv(&[(0, 1), (1, 1)])]);
    let delta = StateDescription::new(ctx, vec![vec![0, 1], vec![1, 1]]).unwrap();
    for ord in VariableOrder::all(&[0, 1]) {
        assert!(check_compatibility(&delta, &ord).unwrap().is_compatible());
    }
}

#[test]
fn entails_reads_the_table() {
    let ctx = full_context(2, vec![Intervention::trivial(), iv(&[(0, 1)])]);
    let delta = StateDescription::new(ctx, vec![vec![0, 0], vec![1, 1]]).unwrap();
    let e = |v, x| FullFormula::boxed(iv(&[(0, 1)]), PropFormula::assign(v, x));
    assert!(entails(&delta, &e(1, 1)).unwrap());
    assert!(!entails(&delta, &e(1, 0)).unwrap());
    assert!(entails(&delta, &FullFormula::not(e(1, 0))).unwrap());
    let outside = FullFormula::boxed(iv(&[(0, 0)]), PropFormula::assign(1, 1));
    assert_eq!(entails(&delta, &outside), Err(CoverageError::Intervention));
}

#[test]
fn point_mass_and_uniform_measures() {
    let sig = xy();
    let ord = VariableOrder::new(vec![0, 1]);
    let ctx = full_context(2, vec![Intervention::trivial(), iv(&[(0, 1)])]);
    let d1 = StateDescription::new(ctx.clone(), vec![vec![0, 0], vec![1, 1]]).unwrap();
    let d2 = StateDescription::new(ctx.clone(), vec![vec![1, 1], vec![1, 1]]).unwrap();
    let m = model_from_measure(&sig, &ctx, &ord, &[(d1.clone(), BigRational::one())]).unwrap();
    assert!(m.prob(&d1.to_formula()).unwrap().is_one());
    assert!(m.is_recursive(&ord));

    let half = rat(1, 2);
    let m = model_from_measure(&sig, &ctx, &ord, &[(d1.clone(), half.clone()), (d2.clone(), half.clone())]).unwrap();
    assert_eq!(m.prob(&d1.to_formula()).unwrap(), half);
    assert_eq!(m.prob(&d2.to_formula()).unwrap(), half);
    assert!(m.is_recursive(&ord));

    // under Y < X the first row sets Y=0 but [X=1] gives Y=1 with no earlier variable set
    let bad = model_from_measure(&sig, &ctx, &VariableOrder::new(vec![1, 0]), &[(d1, BigRational::one())]);
    assert!(matches!(bad, Err(MeasureError::Incompatible(_))));
    let short = model_from_measure(&sig, &ctx, &ord, &[(d2, half)]);
    assert!(matches!(short, Err(MeasureError::WeightSum(_))));
}

/// Results of every intervention in a deterministic model given by one
/// table per variable, each reading only earlier variables in `ord`.
fn run_tables(ord: &[VarId], tables: &[u32], i: &Intervention) -> Vec<ValId> {
    let mut val = vec![0; ord.len()];
    for (r, &v) in ord.iter().enumerate() {
        val[v] = match i.get(v) {
            Some(x) => x,
            None => {
                let key = ord[..r].iter().fold(0, |acc, &w| acc * 2 + val[w]);
                ((tables[r] >> key) & 1) as ValId
            }
        };
    }
    val
}

/// Whether some deterministic model respecting `ord` realizes `delta`.
fn realizable(delta: &StateDescription, ord: &[VarId]) -> bool {
    let ctx = delta.context();
    let n = ord.len();
    let sizes: Vec<u32> = (0..n).map(|r| 1u32 << (1u32 << r)).collect();
    let total: u32 = sizes.iter().product();
    (0..total).any(|code| {
        let mut c = code;
        let tables: Vec<u32> = sizes
            .iter()
            .map(|&s| {
                let t = c % s;
                c /= s;
                t
            })
            .collect();
        ctx.interventions().iter().enumerate().all(|(a, i)| {
            let vals = run_tables(ord, &tables, i);
            ctx.vars().iter().enumerate().all(|(k, &v)| vals[v] == delta.value(a, k))
        })
    })
}

fn random_context(rng: &mut impl Rng, n: usize, rows: usize) -> Arc<DeltaContext> {
    let sig = common::binary_sig(n);
    let mut is = BTreeSet::new();
    while is.len() < rows {
        is.insert(common::random_intervention(rng, &sig, 0.4));
    }
    let mut is: Vec<Intervention> = is.into_iter().collect();
    is.shuffle(rng);
    full_context(n, is)
}

fn random_measure(rng: &mut impl Rng, support: &[StateDescription]) -> Vec<(StateDescription, BigRational)> {
    let w: Vec<i64> = support.iter().map(|_| rng.gen_range(1..5)).collect();
    let total: i64 = w.iter().sum();
    support.iter().zip(w).map(|(d, x)| (d.clone(), rat(x, total))).collect()
}

fn random_ctx_event(rng: &mut impl Rng, ctx: &DeltaContext, depth: u32) -> FullFormula {
    let sig = common::binary_sig(ctx.vars().len());
    if depth == 0 || rng.gen_bool(0.4) {
        let i = ctx.interventions().choose(rng).unwrap().clone();
        return FullFormula::boxed(i, common::random_prop(rng, &sig, 1));
    }
    match rng.gen_range(0..3) {
        0 => FullFormula::not(random_ctx_event(rng, ctx, depth - 1)),
        1 => FullFormula::and(random_ctx_event(rng, ctx, depth - 1), random_ctx_event(rng, ctx, depth - 1)),
        _ => FullFormula::or(random_ctx_event(rng, ctx, depth - 1), random_ctx_event(rng, ctx, depth - 1)),
    }
}

#[test]
fn compatibility_matches_table_search_exhaustively() {
    let mut rng = common::rng(11);
    let mut checked = 0;
    for _ in 0..40 {
        let n = rng.gen_range(1..=3);
        let rows = rng.gen_range(1..=2);
        let ctx = random_context(&mut rng, n, rows);
        let vars: Vec<VarId> = (0..n).collect();
        for ord in VariableOrder::all(&vars) {
            let fast: BTreeSet<StateDescription> =
                compatible_descriptions(&ctx, &ord, 1 << 20).unwrap().unwrap().into_iter().collect();
            for delta in iterate_descriptions(&ctx) {
                let verdict = check_compatibility(&delta, &ord).unwrap();
                assert_eq!(verdict.is_compatible(), realizable(&delta, ord.vars()), "{delta:?} {ord:?}");
                assert_eq!(verdict.is_compatible(), fast.contains(&delta));
                checked += 1;
            }
        }
    }
    assert!(checked > 2000, "{checked}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn compatible_point_masses_reconstruct(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(1..=3);
        let rows = rng.gen_range(1..=3);
        let ctx = random_context(&mut rng, n, rows);
        let mut vars: Vec<VarId> = (0..n).collect();
        vars.shuffle(&mut rng);
        let ord = VariableOrder::new(vars);
        let sig = common::binary_sig(n);
        for delta in iterate_descriptions(&ctx).filter(|d| check_compatibility(d, &ord).unwrap().is_compatible()).take(20) {
            let m = model_from_measure(&sig, &ctx, &ord, &[(delta.clone(), BigRational::one())]).unwrap();
            prop_assert!(m.prob(&delta.to_formula()).unwrap().is_one());
            prop_assert!(m.is_recursive(&ord));
        }
    }

    #[test]
    fn measures_are_recovered(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(1..=3);
        let rows = rng.gen_range(1..=3);
        let ctx = random_context(&mut rng, n, rows);
        let ord = VariableOrder::new((0..n).collect());
        let mut pool = compatible_descriptions(&ctx, &ord, 1 << 20).unwrap().unwrap();
        pool.shuffle(&mut rng);
        let k = rng.gen_range(1..=pool.len().min(4));
        let mu = random_measure(&mut rng, &pool[..k]);
        let m = model_from_measure(&common::binary_sig(n), &ctx, &ord, &mu).unwrap();
        for (d, w) in &mu {
            prop_assert_eq!(&m.prob(&d.to_formula()).unwrap(), w);
        }
        // events over the context get the summed weight of entailing descriptions
        for _ in 0..5 {
            let e = random_ctx_event(&mut rng, &ctx, 2);
            let expected = mu.iter().filter(|(d, _)| entails(d, &e).unwrap()).fold(BigRational::from_integer(0.into()), |acc, (_, w)| acc + w);
            prop_assert_eq!(m.prob(&e).unwrap(), expected);
        }
    }

    #[test]
    fn descriptions_are_mutually_exclusive(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=3);
        let (m, _) = common::random_scm(&mut rng, n, k);
        let rows = rng.gen_range(1..=2);
        let ctx = random_context(&mut rng, n, rows);
        for u in 0..m.exo_space() {
            let u = m.decode_exo(u);
            let mut hits = 0;
            for d in iterate_descriptions(&ctx) {
                hits += m.eval_event(&u, &d.to_formula()).unwrap() as usize;
            }
            // binary domains are covered, so exactly one description holds
            prop_assert_eq!(hits, 1);
        }
    }
}
