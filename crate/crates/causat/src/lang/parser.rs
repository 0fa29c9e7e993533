//! Recursive-descent parser for the formula grammar.
//!
//! ```text
//! document := sig formula (';' formula)* ';'?
//! sig      := 'sig' (ident ':' '{' value (',' value)* '}' ';')+
//! formula  := unary ('&' unary)*
//! unary    := '~' unary | '(' formula ')' | term rel term
//! rel      := '>=' | '<=' | '=' | '>' | '<'
//! term     := prod ('+' prod)*
//! prod     := factor ('*' factor)*
//! factor   := 'P' '(' conj ('|' conj)? ')' | num ('/' num)? | '(' term ')'
//! disj     := conj ('|' conj)*
//! conj     := ev ('&' ev)*
//! ev       := '~' ev | '[' assigns? ']' ev | '(' disj ')' | ident '=' value
//! assigns  := ident '=' value ('&' ident '=' value)*
//! ```
//!
//! A `|` at the top level of a `P( )` argument is the conditioning bar;
//! a disjunction there must be parenthesized. A parenthesis opening a
//! formula is tried as a formula group first and re-read as a term group
//! when a relation or arithmetic operator follows the closing parenthesis.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use super::lexer::{lex, Spanned, Tok};
use super::{
    FullFormula, Intervention, ProbFormula, PropFormula, Signature, SignatureError, Term, ValId, VarDecl, VarId,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub offset: usize,
    pub line: usize,
    pub col: usize,
}

impl Pos {
    fn locate(src: &str, offset: usize) -> Pos {
        let offset = offset.min(src.len());
        let before = &src[..offset];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let col = src[line_start..offset].chars().count() + 1;
        Pos { offset, line, col }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: &'static str, found: String },
    #[error("expected {0}, found end of input")]
    UnexpectedEof(&'static str),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("value `{value}` is not in the domain of `{var}`")]
    ValueNotInDomain { var: String, value: String },
    #[error("variable `{0}` assigned twice in one intervention")]
    DuplicateAssignment(String),
    #[error("interventions cannot be nested inside a boxed formula")]
    NestedIntervention,
    #[error("zero denominator in rational constant")]
    ZeroDenominator,
    #[error("formula nests deeper than {MAX_DEPTH} levels")]
    TooDeep,
    #[error("{0}")]
    Signature(SignatureError),
}

/// Bound on the depth of parsed trees, counting both parentheses and
/// operator chains, so later recursive passes cannot exhaust the stack.
pub const MAX_DEPTH: usize = 512;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub pos: Pos,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.pos.line, self.pos.col, self.kind)
    }
}

impl ParseError {
    pub(crate) fn at(src: &str, offset: usize, kind: ParseErrorKind) -> Self {
        ParseError { pos: Pos::locate(src, offset), kind }
    }

    /// Message followed by the offending line and a caret under the column.
    pub fn render(&self, src: &str) -> String {
        let line = src.lines().nth(self.pos.line - 1).unwrap_or("");
        format!("error: {}\n{line}\n{}^", self, " ".repeat(self.pos.col - 1))
    }
}

/// Parse a bare `sig ...;` block.
pub fn parse_signature(src: &str) -> Result<Signature, ParseError> {
    let toks = lex(src)?;
    let empty = Signature::default();
    let mut p = Parser::new(src, toks, &empty);
    let sig = p.signature()?;
    p.expect_end()?;
    Ok(sig)
}

/// Parse a single formula over `sig`; a trailing `;` is allowed.
pub fn parse_formula(src: &str, sig: &Signature) -> Result<ProbFormula, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser::new(src, toks, sig);
    let f = p.formula()?;
    p.eat(&Tok::Semi);
    p.expect_end()?;
    Ok(f)
}

/// Parse `;`-separated formulas over `sig`.
pub fn parse_formulas(src: &str, sig: &Signature) -> Result<Vec<ProbFormula>, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser::new(src, toks, sig);
    p.formula_list()
}

/// Parse a signature header followed by `;`-separated formulas.
pub fn parse_document(src: &str) -> Result<(Signature, Vec<ProbFormula>), ParseError> {
    let toks = lex(src)?;
    let empty = Signature::default();
    let mut p = Parser::new(src, toks, &empty);
    let sig = p.signature()?;
    let rest = Parser::new(src, p.toks.split_off(p.i), &sig).formula_list()?;
    Ok((sig, rest))
}

/// Event tree before boxes are separated from propositional structure.
enum Ev {
    Assign(VarId, ValId),
    Not(Box<Ev>),
    And(Box<Ev>, Box<Ev>),
    Boxed(Intervention, Box<Ev>),
}

impl Ev {
    fn not(e: Ev) -> Ev {
        Ev::Not(Box::new(e))
    }

    fn and(a: Ev, b: Ev) -> Ev {
        Ev::And(Box::new(a), Box::new(b))
    }

    fn or(a: Ev, b: Ev) -> Ev {
        Ev::not(Ev::and(Ev::not(a), Ev::not(b)))
    }

    fn to_prop(&self) -> Option<PropFormula> {
        match self {
            Ev::Assign(v, x) => Some(PropFormula::Assign(*v, *x)),
            Ev::Not(e) => e.to_prop().map(PropFormula::not),
            Ev::And(a, b) => Some(PropFormula::and(a.to_prop()?, b.to_prop()?)),
            Ev::Boxed(..) => None,
        }
    }

    fn to_full(&self) -> FullFormula {
        if let Some(p) = self.to_prop() {
            return FullFormula::bare(p);
        }
        match self {
            Ev::Boxed(i, e) => FullFormula::Box(i.clone(), e.to_prop().expect("checked during parsing")),
            Ev::Not(e) => FullFormula::not(e.to_full()),
            Ev::And(a, b) => FullFormula::and(a.to_full(), b.to_full()),
            Ev::Assign(..) => unreachable!("assignments are propositional"),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Spanned>,
    i: usize,
    sig: &'a Signature,
    /// Results of `unary` at parenthesis positions; keeps backtracking linear.
    memo: HashMap<usize, PResult<(ProbFormula, usize)>>,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn new(src: &'a str, toks: Vec<Spanned>, sig: &'a Signature) -> Self {
        Parser { src, toks, i: 0, sig, memo: HashMap::new(), depth: 0 }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.i + k).map(|s| &s.tok)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.i).map_or(self.src.len(), |s| s.offset)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError::at(self.src, self.offset(), kind)
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        match self.peek() {
            Some(t) => self.err(ParseErrorKind::Unexpected { expected, found: t.describe() }),
            None => self.err(ParseErrorKind::UnexpectedEof(expected)),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok, what: &'static str) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn expect_end(&self) -> PResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.unexpected("end of input")),
        }
    }

    fn deeper(&mut self) -> PResult<()> {
        if self.depth >= MAX_DEPTH {
            return Err(self.err(ParseErrorKind::TooDeep));
        }
        self.depth += 1;
        Ok(())
    }

    fn nested<T>(&mut self, f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        let d = self.depth;
        self.deeper()?;
        let r = f(self);
        self.depth = d;
        r
    }

    fn ident(&mut self, what: &'static str) -> PResult<(String, usize)> {
        let off = self.offset();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.i += 1;
                Ok((s, off))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn value_text(&mut self) -> PResult<(String, usize)> {
        let off = self.offset();
        match self.peek() {
            Some(Tok::Ident(s)) | Some(Tok::Number(s)) => {
                let s = s.clone();
                self.i += 1;
                Ok((s, off))
            }
            _ => Err(self.unexpected("a value")),
        }
    }

    fn signature(&mut self) -> PResult<Signature> {
        let start = self.offset();
        match self.peek() {
            Some(Tok::Ident(s)) if s == "sig" => self.i += 1,
            _ => return Err(self.unexpected("`sig`")),
        }
        let mut decls = Vec::new();
        loop {
            let (name, _) = self.ident("a variable name")?;
            self.expect(Tok::Colon, "`:`")?;
            self.expect(Tok::LBrace, "`{`")?;
            let mut domain = vec![self.value_text()?.0];
            while self.eat(&Tok::Comma) {
                domain.push(self.value_text()?.0);
            }
            self.expect(Tok::RBrace, "`}`")?;
            self.expect(Tok::Semi, "`;`")?;
            decls.push(VarDecl { name, domain });
            let more = matches!(self.peek(), Some(Tok::Ident(_))) && self.peek_at(1) == Some(&Tok::Colon);
            if !more {
                break;
            }
        }
        Signature::new(decls).map_err(|e| ParseError::at(self.src, start, ParseErrorKind::Signature(e)))
    }

    fn formula_list(&mut self) -> PResult<Vec<ProbFormula>> {
        let mut out = vec![self.formula()?];
        while self.eat(&Tok::Semi) {
            if self.peek().is_none() {
                break;
            }
            out.push(self.formula()?);
        }
        self.expect_end()?;
        Ok(out)
    }

    fn formula(&mut self) -> PResult<ProbFormula> {
        let d = self.depth;
        let mut f = self.unary()?;
        while self.eat(&Tok::Amp) {
            self.deeper()?;
            let g = self.unary()?;
            f = ProbFormula::and(f, g);
        }
        self.depth = d;
        Ok(f)
    }

    fn unary(&mut self) -> PResult<ProbFormula> {
        self.nested(Self::unary_inner)
    }

    fn unary_inner(&mut self) -> PResult<ProbFormula> {
        if self.eat(&Tok::Tilde) {
            return Ok(ProbFormula::not(self.unary()?));
        }
        if self.peek() == Some(&Tok::LParen) {
            let start = self.i;
            if let Some(r) = self.memo.get(&start) {
                let (f, end) = r.clone()?;
                self.i = end;
                return Ok(f);
            }
            let r = self.paren_unary().map(|f| (f, self.i));
            self.memo.insert(start, r.clone());
            return r.map(|(f, _)| f);
        }
        self.atom()
    }

    fn paren_unary(&mut self) -> PResult<ProbFormula> {
        let save = self.i;
        self.i += 1;
        let group = self.formula().and_then(|f| {
            self.expect(Tok::RParen, "`)`")?;
            Ok(f)
        });
        match group {
            Ok(f) if !self.at_term_continuation() => Ok(f),
            Ok(_) => {
                self.i = save;
                self.atom()
            }
            Err(e1) => {
                self.i = save;
                self.atom().map_err(|e2| if e1.pos.offset > e2.pos.offset { e1 } else { e2 })
            }
        }
    }

    fn at_term_continuation(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ge | Tok::Le | Tok::Gt | Tok::Lt | Tok::Eq | Tok::Plus | Tok::Star))
    }

    fn atom(&mut self) -> PResult<ProbFormula> {
        let lhs = self.term()?;
        let rel = match self.peek() {
            Some(t @ (Tok::Ge | Tok::Le | Tok::Gt | Tok::Lt | Tok::Eq)) => t.clone(),
            _ => return Err(self.unexpected("a comparison (>=, <=, =, >, <)")),
        };
        self.i += 1;
        let rhs = self.term()?;
        Ok(match rel {
            Tok::Ge => ProbFormula::geq(lhs, rhs),
            Tok::Le => ProbFormula::le(lhs, rhs),
            Tok::Gt => ProbFormula::gt(lhs, rhs),
            Tok::Lt => ProbFormula::lt(lhs, rhs),
            _ => ProbFormula::eq(lhs, rhs),
        })
    }

    fn term(&mut self) -> PResult<Term> {
        let d = self.depth;
        let mut t = self.product()?;
        while self.eat(&Tok::Plus) {
            self.deeper()?;
            let u = self.product()?;
            t = Term::sum(t, u);
        }
        self.depth = d;
        Ok(t)
    }

    fn product(&mut self) -> PResult<Term> {
        let d = self.depth;
        let mut t = self.factor()?;
        while self.eat(&Tok::Star) {
            self.deeper()?;
            let u = self.factor()?;
            t = Term::product(t, u);
        }
        self.depth = d;
        Ok(t)
    }

    fn factor(&mut self) -> PResult<Term> {
        self.nested(Self::factor_inner)
    }

    fn factor_inner(&mut self) -> PResult<Term> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == "P" && self.peek_at(1) == Some(&Tok::LParen) => {
                self.i += 2;
                let e = self.conj()?;
                let t = if self.eat(&Tok::Bar) {
                    let g = self.conj()?;
                    Term::cond(e.to_full(), g.to_full())
                } else {
                    Term::prob(e.to_full())
                };
                self.expect(Tok::RParen, "`)` or `|`")?;
                Ok(t)
            }
            Some(Tok::Number(_)) => self.rational(),
            Some(Tok::LParen) => {
                self.i += 1;
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            _ => Err(self.unexpected("a term (P(...), a number, or `(`)")),
        }
    }

    fn rational(&mut self) -> PResult<Term> {
        let num = self.number()?;
        let den = if self.eat(&Tok::Slash) {
            let off = self.offset();
            let d = self.number()?;
            if d.is_zero() {
                return Err(ParseError::at(self.src, off, ParseErrorKind::ZeroDenominator));
            }
            d
        } else {
            BigInt::from(1)
        };
        Ok(Term::Const(BigRational::new(num, den)))
    }

    fn number(&mut self) -> PResult<BigInt> {
        match self.peek() {
            Some(Tok::Number(s)) => {
                let n = s.parse().expect("lexer only emits digit runs");
                self.i += 1;
                Ok(n)
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    fn disj(&mut self) -> PResult<Ev> {
        let d = self.depth;
        let mut e = self.conj()?;
        while self.eat(&Tok::Bar) {
            self.depth += 2;
            self.deeper()?;
            let f = self.conj()?;
            e = Ev::or(e, f);
        }
        self.depth = d;
        Ok(e)
    }

    fn conj(&mut self) -> PResult<Ev> {
        let d = self.depth;
        let mut e = self.ev()?;
        while self.eat(&Tok::Amp) {
            self.deeper()?;
            let f = self.ev()?;
            e = Ev::and(e, f);
        }
        self.depth = d;
        Ok(e)
    }

    fn ev(&mut self) -> PResult<Ev> {
        self.nested(Self::ev_inner)
    }

    fn ev_inner(&mut self) -> PResult<Ev> {
        match self.peek() {
            Some(Tok::Tilde) => {
                self.i += 1;
                Ok(Ev::not(self.ev()?))
            }
            Some(Tok::LBracket) => {
                self.i += 1;
                let i = self.intervention()?;
                let off = self.offset();
                let body = self.ev()?;
                if body.to_prop().is_none() {
                    return Err(ParseError::at(self.src, off, ParseErrorKind::NestedIntervention));
                }
                Ok(Ev::Boxed(i, Box::new(body)))
            }
            Some(Tok::LParen) => {
                self.i += 1;
                let e = self.disj()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(_)) => {
                let (v, x) = self.assignment()?;
                Ok(Ev::Assign(v, x))
            }
            _ => Err(self.unexpected("an event")),
        }
    }

    fn intervention(&mut self) -> PResult<Intervention> {
        let mut pairs = Vec::new();
        if !self.eat(&Tok::RBracket) {
            loop {
                let off = self.offset();
                let (v, x) = self.assignment()?;
                if pairs.iter().any(|&(w, _)| w == v) {
                    let name = self.sig.var_name(v).to_string();
                    return Err(ParseError::at(self.src, off, ParseErrorKind::DuplicateAssignment(name)));
                }
                pairs.push((v, x));
                if !self.eat(&Tok::Amp) {
                    break;
                }
            }
            self.expect(Tok::RBracket, "`]` or `&`")?;
        }
        Ok(Intervention::new(pairs).expect("duplicates rejected above"))
    }

    fn assignment(&mut self) -> PResult<(VarId, ValId)> {
        let (name, off) = self.ident("a variable")?;
        let v = self
            .sig
            .lookup(&name)
            .ok_or_else(|| ParseError::at(self.src, off, ParseErrorKind::UnknownVariable(name.clone())))?;
        self.expect(Tok::Eq, "`=`")?;
        let (value, voff) = self.value_text()?;
        let x = self
            .sig
            .value(v, &value)
            .ok_or_else(|| ParseError::at(self.src, voff, ParseErrorKind::ValueNotInDomain { var: name, value }))?;
        Ok((v, x))
    }
}
