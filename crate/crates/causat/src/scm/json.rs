//! JSON form of a model.
//!
//! ```json
//! {"endogenous":[{"name":"X","domain":["0","1"]}],
//!  "exogenous":[{"name":"U","domain":["0","1"]}],
//!  "dist":[{"u":{"U":"1"},"w":"1/2"}, {"u":{"U":"0"},"w":"1/2"}],
//!  "functions":{"X":[{"given":{},"u":{"U":"1"},"value":"1"},{"value":"0"}]}}
//! ```
//!
//! Function entries are patterns: keys left out of `given` (other
//! endogenous variables) or `u` (exogenous variables) match any value, and
//! the first matching entry wins. Every input must be matched by some
//! entry. Weights are exact rationals written `p/q`, integers, or finite
//! decimals.

use std::collections::BTreeMap;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{decode, Scm, ScmError, Table};
use crate::lang::{Signature, ValId, VarDecl, VarId};

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("malformed model JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("value `{value}` is not in the domain of `{var}`")]
    UnknownValue { var: String, value: String },
    #[error("`{0}` is not an exact rational")]
    BadWeight(String),
    #[error("distribution entry must assign every exogenous variable, missing `{0}`")]
    PartialExo(String),
    #[error("no function given for `{0}`")]
    MissingFunction(String),
    #[error("function `{var}` has no entry matching {input}")]
    Uncovered { var: String, input: String },
    #[error("`{0}` cannot appear in its own function's `given`")]
    SelfReference(String),
    #[error("{0}")]
    Model(#[from] ScmError),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VarJson {
    name: String,
    domain: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistJson {
    u: BTreeMap<String, String>,
    w: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryJson {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    given: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    u: BTreeMap<String, String>,
    value: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScmJson {
    endogenous: Vec<VarJson>,
    #[serde(default)]
    exogenous: Vec<VarJson>,
    dist: Vec<DistJson>,
    functions: BTreeMap<String, Vec<EntryJson>>,
}

/// Parse `p/q`, an integer, or a finite decimal such as `0.25`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let neg = int.starts_with('-');
        let int_digits = int.trim_start_matches('-');
        if !int_digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let whole: BigInt = format!("{int_digits}{frac}").parse().ok()?;
        let r = BigRational::new(whole, BigInt::from(10).pow(frac.len() as u32));
        return Some(if neg { -r } else { r });
    }
    let r = BigRational::from_str(s).ok()?;
    Some(r)
}

fn decls(vars: Vec<VarJson>) -> Vec<VarDecl> {
    vars.into_iter().map(|v| VarDecl { name: v.name, domain: v.domain }).collect()
}

fn lookup(decls: &[VarDecl], name: &str) -> Result<usize, JsonError> {
    decls.iter().position(|d| d.name == name).ok_or_else(|| JsonError::UnknownVariable(name.to_string()))
}

fn lookup_value(d: &VarDecl, value: &str) -> Result<ValId, JsonError> {
    d.domain
        .iter()
        .position(|x| x == value)
        .ok_or_else(|| JsonError::UnknownValue { var: d.name.clone(), value: value.to_string() })
}

struct Pattern {
    given: Vec<(VarId, ValId)>,
    u: Vec<(usize, ValId)>,
    value: ValId,
}

impl Scm {
    pub fn from_json(text: &str) -> Result<Scm, JsonError> {
        let raw: ScmJson = serde_json::from_str(text)?;
        let endo = decls(raw.endogenous);
        let exo = decls(raw.exogenous);
        let sig = Signature::new(endo.clone()).map_err(ScmError::from)?;
        Signature::new(exo.clone()).map_err(ScmError::from)?;

        let mut dist = Vec::with_capacity(raw.dist.len());
        for d in raw.dist {
            let mut u = vec![None; exo.len()];
            for (name, value) in &d.u {
                let k = lookup(&exo, name)?;
                u[k] = Some(lookup_value(&exo[k], value)?);
            }
            let u = u
                .into_iter()
                .enumerate()
                .map(|(k, x)| x.ok_or_else(|| JsonError::PartialExo(exo[k].name.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            let w = parse_rational(&d.w).ok_or_else(|| JsonError::BadWeight(d.w.clone()))?;
            dist.push((u, w));
        }

        for name in raw.functions.keys() {
            lookup(&endo, name)?;
        }
        let exo_sizes: Vec<usize> = exo.iter().map(|d| d.domain.len()).collect();
        let exo_space: usize = exo_sizes.iter().product();
        let mut tables = Vec::with_capacity(endo.len());
        for (v, decl) in endo.iter().enumerate() {
            let entries = raw.functions.get(&decl.name).ok_or_else(|| JsonError::MissingFunction(decl.name.clone()))?;
            let mut patterns = Vec::with_capacity(entries.len());
            for e in entries {
                let mut given = Vec::new();
                for (name, value) in &e.given {
                    let w = lookup(&endo, name)?;
                    if w == v {
                        return Err(JsonError::SelfReference(name.clone()));
                    }
                    given.push((w, lookup_value(&endo[w], value)?));
                }
                let mut u = Vec::new();
                for (name, value) in &e.u {
                    let k = lookup(&exo, name)?;
                    u.push((k, lookup_value(&exo[k], value)?));
                }
                patterns.push(Pattern { given, u, value: lookup_value(decl, &e.value)? });
            }
            if let [Pattern { given, u, value }] = patterns.as_slice() {
                if given.is_empty() && u.is_empty() {
                    tables.push(Table::Const(*value));
                    continue;
                }
            }
            let others: Vec<VarId> = (0..endo.len()).filter(|&w| w != v).collect();
            let radices: Vec<usize> = others.iter().map(|&w| endo[w].domain.len()).collect();
            let space: usize = radices.iter().product();
            let mut table = Vec::with_capacity(space * exo_space);
            let mut endo_vals = vec![0; endo.len()];
            for o in 0..space {
                for (k, x) in decode(o, &radices).into_iter().enumerate() {
                    endo_vals[others[k]] = x;
                }
                for uc in 0..exo_space {
                    let uv = decode(uc, &exo_sizes);
                    let hit = patterns.iter().find(|p| {
                        p.given.iter().all(|&(w, x)| endo_vals[w] == x) && p.u.iter().all(|&(k, x)| uv[k] == x)
                    });
                    match hit {
                        Some(p) => table.push(p.value),
                        None => {
                            let mut parts: Vec<String> = others
                                .iter()
                                .map(|&w| format!("{}={}", endo[w].name, endo[w].domain[endo_vals[w]]))
                                .collect();
                            parts.extend(exo.iter().zip(&uv).map(|(d, &x)| format!("{}={}", d.name, d.domain[x])));
                            return Err(JsonError::Uncovered { var: decl.name.clone(), input: parts.join(", ") });
                        }
                    }
                }
            }
            tables.push(Table::Dense(table));
        }
        Ok(Scm::new(sig, exo, dist, tables)?)
    }

    /// Serialize, listing each function only over the inputs it depends on.
    pub fn to_json(&self) -> String {
        let sig = self.sig();
        let var_json = |d: &VarDecl| VarJson { name: d.name.clone(), domain: d.domain.clone() };
        let dist = self
            .support()
            .map(|(u, w)| DistJson {
                u: self.exo.iter().zip(&u).map(|(d, &x)| (d.name.clone(), d.domain[x].clone())).collect(),
                w: format_rational(w),
            })
            .collect();
        let mut functions = BTreeMap::new();
        for v in 0..sig.len() {
            functions.insert(sig.var_name(v).to_string(), self.function_entries(v));
        }
        let raw = ScmJson {
            endogenous: sig.vars().iter().map(var_json).collect(),
            exogenous: self.exo.iter().map(var_json).collect(),
            dist,
            functions,
        };
        serde_json::to_string_pretty(&raw).expect("model JSON serializes")
    }

    fn function_entries(&self, v: VarId) -> Vec<EntryJson> {
        let sig = self.sig();
        if let Table::Const(x) = self.table(v) {
            return vec![EntryJson {
                given: BTreeMap::new(),
                u: BTreeMap::new(),
                value: sig.value_name(v, *x).to_string(),
            }];
        }
        let endo_deps = self.depends_on(v);
        let exo_sizes: Vec<usize> = self.exo.iter().map(|d| d.domain.len()).collect();
        let exo_deps: Vec<usize> = (0..self.exo.len()).filter(|&k| self.exo_relevant(v, k, &exo_sizes)).collect();
        let mut radices: Vec<usize> = endo_deps.iter().map(|&w| sig.domain_size(w)).collect();
        radices.extend(exo_deps.iter().map(|&k| exo_sizes[k]));
        let space: usize = radices.iter().product();
        let mut out = Vec::with_capacity(space);
        for code in 0..space {
            let digits = decode(code, &radices);
            let mut endo = vec![0; sig.len()];
            let mut uv = vec![0; self.exo.len()];
            for (j, &w) in endo_deps.iter().enumerate() {
                endo[w] = digits[j];
            }
            for (j, &k) in exo_deps.iter().enumerate() {
                uv[k] = digits[endo_deps.len() + j];
            }
            let x = self.apply(v, &endo, self.encode_exo(&uv));
            out.push(EntryJson {
                given: endo_deps
                    .iter()
                    .map(|&w| (sig.var_name(w).to_string(), sig.value_name(w, endo[w]).to_string()))
                    .collect(),
                u: exo_deps.iter().map(|&k| (self.exo[k].name.clone(), self.exo[k].domain[uv[k]].clone())).collect(),
                value: sig.value_name(v, x).to_string(),
            });
        }
        out
    }

    fn exo_relevant(&self, v: VarId, k: usize, exo_sizes: &[usize]) -> bool {
        let n = self.sig().len();
        let others: Vec<VarId> = (0..n).filter(|&w| w != v).collect();
        let radices: Vec<usize> = others.iter().map(|&w| self.sig().domain_size(w)).collect();
        let space: usize = radices.iter().product();
        let mut endo = vec![0; n];
        for o in 0..space {
            for (j, x) in decode(o, &radices).into_iter().enumerate() {
                endo[others[j]] = x;
            }
            for uc in 0..self.exo_space {
                let mut uv = decode(uc, exo_sizes);
                if uv[k] != 0 {
                    continue;
                }
                let base = self.apply(v, &endo, uc);
                for alt in 1..exo_sizes[k] {
                    uv[k] = alt;
                    if self.apply(v, &endo, self.encode_exo(&uv)) != base {
                        return true;
                    }
                }
            }
        }
        false
    }
}

pub(crate) fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else if r.is_zero() {
        "0".into()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
