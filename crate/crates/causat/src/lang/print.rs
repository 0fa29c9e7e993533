//! Printing in the concrete syntax accepted by the parser.
//!
//! Derived connectives are recovered on output: `~(~a & ~b)` prints as
//! `a | b`, `a >= b & b >= a` as `a = b`, and `~(b >= a)` as `a > b`.
//! Each of these reparses to the same tree.

use std::fmt::Write;

use num_traits::One;

use super::{FullFormula, Intervention, ProbFormula, PropFormula, Signature, Term};

const OR: u8 = 1;
const AND: u8 = 2;
const UNARY: u8 = 3;

pub fn print_signature(sig: &Signature) -> String {
    let mut out = String::from("sig");
    for d in sig.vars() {
        write!(out, " {}:{{{}}};", d.name, d.domain.join(",")).unwrap();
    }
    out
}

pub fn print_formula(sig: &Signature, f: &ProbFormula) -> String {
    let mut out = String::new();
    formula(sig, f, 1, &mut out);
    out
}

pub fn print_term(sig: &Signature, t: &Term) -> String {
    let mut out = String::new();
    term(sig, t, 1, &mut out);
    out
}

/// Event as it appears inside `P( )`, without the surrounding call.
pub fn print_event(sig: &Signature, e: &FullFormula) -> String {
    let mut out = String::new();
    full(sig, e, OR, &mut out);
    out
}

pub fn print_prop(sig: &Signature, p: &PropFormula) -> String {
    let mut out = String::new();
    prop(sig, p, OR, &mut out);
    out
}

pub fn print_intervention(sig: &Signature, i: &Intervention) -> String {
    i.pairs()
        .iter()
        .map(|&(v, x)| format!("{}={}", sig.var_name(v), sig.value_name(v, x)))
        .collect::<Vec<_>>()
        .join(" & ")
}

fn open(need: u8, level: u8, out: &mut String) -> bool {
    let paren = level > need;
    if paren {
        out.push('(');
    }
    paren
}

fn close(paren: bool, out: &mut String) {
    if paren {
        out.push(')');
    }
}

fn prop_or_parts(p: &PropFormula) -> Option<(&PropFormula, &PropFormula)> {
    if let PropFormula::Not(inner) = p {
        if let PropFormula::And(a, b) = inner.as_ref() {
            if let (PropFormula::Not(a), PropFormula::Not(b)) = (a.as_ref(), b.as_ref()) {
                return Some((a, b));
            }
        }
    }
    None
}

fn prop(sig: &Signature, p: &PropFormula, level: u8, out: &mut String) {
    if let Some((a, b)) = prop_or_parts(p) {
        let paren = open(OR, level, out);
        prop(sig, a, OR, out);
        out.push_str(" | ");
        prop(sig, b, AND, out);
        close(paren, out);
        return;
    }
    match p {
        PropFormula::Assign(v, x) => {
            write!(out, "{}={}", sig.var_name(*v), sig.value_name(*v, *x)).unwrap();
        }
        PropFormula::Not(q) => {
            out.push('~');
            prop(sig, q, UNARY, out);
        }
        PropFormula::And(a, b) => {
            let paren = open(AND, level, out);
            prop(sig, a, AND, out);
            out.push_str(" & ");
            prop(sig, b, UNARY, out);
            close(paren, out);
        }
    }
}

fn full_or_parts(e: &FullFormula) -> Option<(&FullFormula, &FullFormula)> {
    if let FullFormula::Not(inner) = e {
        if let FullFormula::And(a, b) = inner.as_ref() {
            if let (FullFormula::Not(a), FullFormula::Not(b)) = (a.as_ref(), b.as_ref()) {
                return Some((a, b));
            }
        }
    }
    None
}

fn full(sig: &Signature, e: &FullFormula, level: u8, out: &mut String) {
    if let Some((a, b)) = full_or_parts(e) {
        let paren = open(OR, level, out);
        full(sig, a, OR, out);
        out.push_str(" | ");
        full(sig, b, AND, out);
        close(paren, out);
        return;
    }
    match e {
        FullFormula::Box(i, p) if i.is_trivial() => prop(sig, p, level, out),
        FullFormula::Box(i, p) => {
            write!(out, "[{}] ", print_intervention(sig, i)).unwrap();
            prop(sig, p, UNARY, out);
        }
        FullFormula::Not(q) => {
            out.push('~');
            full(sig, q, UNARY, out);
        }
        FullFormula::And(a, b) => {
            let paren = open(AND, level, out);
            full(sig, a, AND, out);
            out.push_str(" & ");
            full(sig, b, UNARY, out);
            close(paren, out);
        }
    }
}

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const FACTOR: u8 = 3;

fn term(sig: &Signature, t: &Term, level: u8, out: &mut String) {
    match t {
        Term::Prob(e) => {
            out.push_str("P(");
            full(sig, e, AND, out);
            out.push(')');
        }
        Term::CondProb(e, g) => {
            out.push_str("P(");
            full(sig, e, AND, out);
            out.push_str(" | ");
            full(sig, g, AND, out);
            out.push(')');
        }
        Term::Sum(a, b) => {
            let paren = open(SUM, level, out);
            term(sig, a, SUM, out);
            out.push_str(" + ");
            term(sig, b, PRODUCT, out);
            close(paren, out);
        }
        Term::Product(a, b) => {
            let paren = open(PRODUCT, level, out);
            term(sig, a, PRODUCT, out);
            out.push_str(" * ");
            term(sig, b, FACTOR, out);
            close(paren, out);
        }
        Term::Const(c) => {
            if c.denom().is_one() {
                write!(out, "{}", c.numer()).unwrap();
            } else {
                write!(out, "{}/{}", c.numer(), c.denom()).unwrap();
            }
        }
    }
}

fn atom(sig: &Signature, a: &Term, rel: &str, b: &Term, out: &mut String) {
    term(sig, a, SUM, out);
    write!(out, " {rel} ").unwrap();
    term(sig, b, SUM, out);
}

fn formula(sig: &Signature, f: &ProbFormula, level: u8, out: &mut String) {
    const CONJ: u8 = 1;
    const NEG: u8 = 2;
    match f {
        ProbFormula::And(l, r) => {
            if let (ProbFormula::Geq(a, b), ProbFormula::Geq(b2, a2)) = (l.as_ref(), r.as_ref()) {
                if a == a2 && b == b2 {
                    return atom(sig, a, "=", b, out);
                }
            }
            let paren = open(CONJ, level, out);
            formula(sig, l, CONJ, out);
            out.push_str(" & ");
            formula(sig, r, NEG, out);
            close(paren, out);
        }
        ProbFormula::Not(inner) => match inner.as_ref() {
            ProbFormula::Geq(b, a) => atom(sig, a, ">", b, out),
            other => {
                out.push('~');
                formula(sig, other, NEG, out);
            }
        },
        ProbFormula::Geq(a, b) => atom(sig, a, ">=", b, out),
    }
}
