//! SMT-LIB 2 text for polynomial systems (quantifier-free nonlinear real
//! arithmetic). Output depends only on the system, so it is stable
//! across runs.

use std::fmt::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};

use super::etr::{EtrSystem, Rel, VarKind};
use super::poly::Poly;

fn int(n: &BigInt) -> String {
    if n.is_negative() {
        format!("(- {}.0)", -n)
    } else {
        format!("{n}.0")
    }
}

pub fn rational(q: &BigRational) -> String {
    if q.is_integer() {
        return int(q.numer());
    }
    let body = format!("(/ {}.0 {}.0)", q.numer().abs(), q.denom());
    if q.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

fn poly(p: &Poly, names: &[String]) -> String {
    let mut terms = Vec::new();
    for (m, c) in p.terms() {
        let mut factors = Vec::new();
        if m.is_empty() || !c.is_one() {
            factors.push(rational(c));
        }
        for &(v, e) in m {
            for _ in 0..e {
                factors.push(names[v].clone());
            }
        }
        terms.push(if factors.len() == 1 { factors.pop().unwrap() } else { format!("(* {})", factors.join(" ")) });
    }
    match terms.len() {
        0 => "0.0".into(),
        1 => terms.pop().unwrap(),
        _ => format!("(+ {})", terms.join(" ")),
    }
}

pub fn emit_smtlib(sys: &EtrSystem) -> String {
    let names: Vec<String> = sys.vars.iter().map(|v| v.name.clone()).collect();
    let mut out = String::new();
    out.push_str("(set-option :produce-models true)\n(set-logic QF_NRA)\n");
    for v in &sys.vars {
        writeln!(out, "(declare-const {} Real)", v.name).unwrap();
    }
    for v in &sys.vars {
        match v.kind {
            VarKind::Prob | VarKind::CondAux => writeln!(out, "(assert (<= 0.0 {} 1.0))", v.name).unwrap(),
            VarKind::Selector { .. } => writeln!(out, "(assert (or (= {0} 0.0) (= {0} 1.0)))", v.name).unwrap(),
            VarKind::Free => {}
        }
    }
    for c in &sys.constraints {
        let op = match c.rel {
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        };
        writeln!(out, "(assert ({op} {} 0.0))", poly(&c.poly, &names)).unwrap();
    }
    out.push_str("(check-sat)\n(get-model)\n");
    out
}
