//! Atoms of a measure: the descriptions probability mass sits on.
//!
//! A formula whose events fall into variable groups that no single event
//! (or conditional pair) straddles constrains only the marginals of each
//! group, and any family of marginals is realized by their product. So
//! each group gets its own simplex instead of one joint simplex.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use super::Measure;
use crate::lang::{classify, FullFormula, Intervention, ProbFormula, Signature, Term, VarId};
use crate::statedesc::{build_context, entails, iterate_descriptions, CoverageError, DeltaContext, StateDescription};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AtomError {
    #[error("factored atoms need a purely probabilistic formula")]
    Causal,
    #[error("event spans more than one variable group")]
    Span,
    #[error("{0}")]
    Coverage(#[from] CoverageError),
    #[error("atom space has more than {0} states")]
    TooLarge(usize),
}

/// Largest number of states a single block may enumerate.
pub const MAX_BLOCK_STATES: usize = 1 << 16;

#[derive(Clone, Debug)]
pub struct Block {
    pub ctx: Arc<DeltaContext>,
    pub states: Vec<StateDescription>,
}

#[derive(Clone, Debug)]
pub struct Atomization {
    blocks: Vec<Block>,
    offsets: Vec<usize>,
    /// Block of each variable, for factored atomizations.
    var_block: BTreeMap<VarId, usize>,
    cache: HashMap<FullFormula, (usize, Vec<usize>)>,
}

fn event_vars(e: &FullFormula, out: &mut Vec<VarId>) {
    e.visit_boxes(&mut |i, p| {
        out.extend(i.pairs().iter().map(|&(v, _)| v));
        p.visit_assignments(&mut |v, _| out.push(v));
    });
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

/// Weights over merged columns: states of one block entailing exactly the
/// same events carry the same coefficients everywhere, so only their
/// total matters.
#[derive(Clone, Debug)]
pub struct Columns {
    /// Representative global unknown of each column.
    pub reps: Vec<usize>,
    /// Columns of each block.
    pub simplices: Vec<Vec<usize>>,
    /// Columns entailing each event.
    pub events: HashMap<FullFormula, Vec<usize>>,
}

impl Columns {
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    /// Per-unknown weights putting each column's mass on its representative.
    pub fn expand(&self, x: &[BigRational], unknowns: usize) -> Vec<BigRational> {
        let mut values = vec![BigRational::zero(); unknowns];
        for (c, &r) in self.reps.iter().enumerate() {
            values[r] = x[c].clone();
        }
        values
    }
}

impl Atomization {
    fn from_blocks(blocks: Vec<Block>, var_block: BTreeMap<VarId, usize>) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut acc = 0;
        for b in &blocks {
            offsets.push(acc);
            acc += b.states.len();
        }
        Atomization { blocks, offsets, var_block, cache: HashMap::new() }
    }

    /// One block per group of variables linked by a shared event.
    pub fn factored(sig: &Signature, psi: &ProbFormula) -> Result<Self, AtomError> {
        if classify(psi).causal {
            return Err(AtomError::Causal);
        }
        let ctx = build_context(sig, psi);
        let n = ctx.vars().len();
        let mut parent: Vec<usize> = (0..n).collect();
        let link = |vars: &[VarId], parent: &mut Vec<usize>| {
            let idx: Vec<usize> = vars.iter().map(|&v| ctx.var_index(v).unwrap()).collect();
            for w in idx.windows(2) {
                let (a, b) = (find(parent, w[0]), find(parent, w[1]));
                parent[a] = b;
            }
        };
        psi.visit_terms(&mut |t| {
            let mut stack = vec![t];
            while let Some(t) = stack.pop() {
                match t {
                    Term::Prob(e) => {
                        let mut vs = Vec::new();
                        event_vars(e, &mut vs);
                        link(&vs, &mut parent);
                    }
                    Term::CondProb(e, g) => {
                        let mut vs = Vec::new();
                        event_vars(e, &mut vs);
                        event_vars(g, &mut vs);
                        link(&vs, &mut parent);
                    }
                    Term::Sum(a, b) | Term::Product(a, b) => {
                        stack.push(a);
                        stack.push(b);
                    }
                    Term::Const(_) => {}
                }
            }
        });
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for k in 0..n {
            groups.entry(find(&mut parent, k)).or_default().push(k);
        }
        let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
        groups.sort();
        let mut blocks = Vec::with_capacity(groups.len());
        let mut var_block = BTreeMap::new();
        for (b, g) in groups.iter().enumerate() {
            let vars: Vec<VarId> = g.iter().map(|&k| ctx.vars()[k]).collect();
            let assignments: Vec<Vec<_>> = g.iter().map(|&k| ctx.assignments(k).to_vec()).collect();
            let size = assignments.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.len()));
            if size.is_none_or(|s| s > MAX_BLOCK_STATES) {
                return Err(AtomError::TooLarge(MAX_BLOCK_STATES));
            }
            for &v in &vars {
                var_block.insert(v, b);
            }
            let bctx = Arc::new(
                DeltaContext::new(vec![Intervention::trivial()], vars, assignments)
                    .expect("sub-context of a valid context"),
            );
            let states = iterate_descriptions(&bctx).collect();
            blocks.push(Block { ctx: bctx, states });
        }
        Ok(Self::from_blocks(blocks, var_block))
    }

    /// A single block holding the given descriptions.
    pub fn explicit(ctx: Arc<DeltaContext>, states: Vec<StateDescription>) -> Self {
        Self::from_blocks(vec![Block { ctx, states }], BTreeMap::new())
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn offset(&self, b: usize) -> usize {
        self.offsets[b]
    }

    /// Total number of state unknowns.
    pub fn unknowns(&self) -> usize {
        self.blocks.iter().map(|b| b.states.len()).sum()
    }

    /// Block of `e` and the global indices of the states entailing it.
    pub fn indicator(&mut self, e: &FullFormula) -> Result<(usize, Vec<usize>), AtomError> {
        if let Some(hit) = self.cache.get(e) {
            return Ok(hit.clone());
        }
        let b = if self.var_block.is_empty() {
            0
        } else {
            let mut vs = Vec::new();
            event_vars(e, &mut vs);
            let mut bs = vs.iter().map(|v| self.var_block.get(v).copied());
            let first = bs.next().flatten().ok_or(AtomError::Span)?;
            if bs.any(|x| x != Some(first)) {
                return Err(AtomError::Span);
            }
            first
        };
        let block = &self.blocks[b];
        let mut hits = Vec::new();
        for (k, s) in block.states.iter().enumerate() {
            if entails(s, e)? {
                hits.push(self.offsets[b] + k);
            }
        }
        let out = (b, hits);
        self.cache.insert(e.clone(), out.clone());
        Ok(out)
    }

    /// Merge the states of each block by which of `events` they entail.
    pub fn columns(&mut self, events: &[&FullFormula]) -> Result<Columns, AtomError> {
        let mut hits = Vec::with_capacity(events.len());
        for e in events {
            hits.push(self.indicator(e)?.1);
        }
        let n = self.unknowns();
        let mut sig: Vec<Vec<bool>> = vec![vec![false; events.len()]; n];
        for (j, h) in hits.iter().enumerate() {
            for &x in h {
                sig[x][j] = true;
            }
        }
        let mut class: HashMap<(usize, &[bool]), usize> = HashMap::new();
        let mut of = vec![0; n];
        let mut reps = Vec::new();
        let mut simplices = vec![Vec::new(); self.blocks.len()];
        for (x, s) in sig.iter().enumerate() {
            let b = self.locate(x).0;
            let c = *class.entry((b, s.as_slice())).or_insert_with(|| {
                reps.push(x);
                simplices[b].push(reps.len() - 1);
                reps.len() - 1
            });
            of[x] = c;
        }
        let mut by_event = HashMap::new();
        for (e, h) in events.iter().zip(&hits) {
            let mut cols: Vec<usize> = h.iter().map(|&x| of[x]).collect();
            cols.sort_unstable();
            cols.dedup();
            by_event.insert((*e).clone(), cols);
        }
        Ok(Columns { reps, simplices, events: by_event })
    }

    /// Block and local index of a global unknown.
    pub fn locate(&self, x: usize) -> (usize, usize) {
        let b = self.offsets.partition_point(|&o| o <= x) - 1;
        (b, x - self.offsets[b])
    }

    /// Combine per-block weights (indexed by global unknown) into a
    /// measure on `target`, the joint context of the formula. Explicit
    /// atomizations map straight onto their own context.
    pub fn joint_measure(&self, target: &Arc<DeltaContext>, values: &[BigRational]) -> Measure {
        if self.var_block.is_empty() && self.blocks.len() == 1 {
            let b = &self.blocks[0];
            let weights = b
                .states
                .iter()
                .zip(values)
                .filter(|(_, w)| !w.is_zero())
                .map(|(s, w)| (s.clone(), w.clone()))
                .collect();
            return Measure { ctx: b.ctx.clone(), weights };
        }
        let n = target.vars().len();
        let mut partial: Vec<(Vec<usize>, BigRational)> = vec![(vec![0; n], BigRational::one())];
        for (b, block) in self.blocks.iter().enumerate() {
            let cols: Vec<usize> =
                block.ctx.vars().iter().map(|&v| target.var_index(v).expect("block variable in target")).collect();
            let support: Vec<(&StateDescription, &BigRational)> = block
                .states
                .iter()
                .enumerate()
                .map(|(k, s)| (s, &values[self.offsets[b] + k]))
                .filter(|(_, w)| !w.is_zero())
                .collect();
            let mut next = Vec::with_capacity(partial.len() * support.len());
            for (row, w) in &partial {
                for (s, sw) in &support {
                    let mut r = row.clone();
                    for (j, &c) in cols.iter().enumerate() {
                        r[c] = s.value(0, j);
                    }
                    next.push((r, w * *sw));
                }
            }
            partial = next;
        }
        let weights = partial
            .into_iter()
            .map(|(row, w)| (StateDescription::new(target.clone(), vec![row]).expect("joint row within context"), w))
            .collect();
        Measure { ctx: target.clone(), weights }
    }
}
