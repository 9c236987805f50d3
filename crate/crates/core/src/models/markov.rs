use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BlockAtom, BlockKind, BlockLaw, ProcessModel};
use crate::error::{invalid, Error, Result};
use crate::lattice::detect_lattice;
use crate::rng::Stream;
use crate::types::BlockSample;

/// Tail mass below which an enumerated block law counts as exact.
pub const BLOCK_LAW_TAIL: f64 = 1e-14;
const EXACT_MAX_STATES: usize = 20;
const EXACT_MAX_BLOCK_LEN: u64 = 100_000;
/// Cap on `n * S^2 * levels` for the exact value-law recursion.
const EXACT_WORK_BUDGET: f64 = 4e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    transition: Vec<Vec<f64>>,
    f: Vec<f64>,
    anchor: usize,
    initial: Vec<f64>,
}

/// Finite-state chain with an additive functional `f` and an anchor state
/// whose return times are the regenerations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChain", into = "RawChain")]
pub struct FiniteMarkovChain {
    transition: Vec<Vec<f64>>,
    f: Vec<f64>,
    anchor: usize,
    initial: Vec<f64>,
}

impl TryFrom<RawChain> for FiniteMarkovChain {
    type Error = Error;
    fn try_from(r: RawChain) -> Result<Self> {
        Self::new(r.transition, r.f, r.anchor, r.initial)
    }
}

impl From<FiniteMarkovChain> for RawChain {
    fn from(c: FiniteMarkovChain) -> Self {
        RawChain {
            transition: c.transition,
            f: c.f,
            anchor: c.anchor,
            initial: c.initial,
        }
    }
}

impl FiniteMarkovChain {
    pub fn new(
        transition: Vec<Vec<f64>>,
        f: Vec<f64>,
        anchor: usize,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let n = transition.len();
        if n == 0 {
            return invalid("chain needs at least one state");
        }
        if f.len() != n || initial.len() != n || transition.iter().any(|r| r.len() != n) {
            return invalid("transition, f and initial dimensions disagree");
        }
        if anchor >= n {
            return invalid(format!("anchor {anchor} out of range"));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return invalid(format!("row {i} has a negative or non-finite entry"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return invalid(format!("row {i} sums to {s}"));
            }
        }
        if f.iter().any(|v| !v.is_finite()) {
            return invalid("f must be finite");
        }
        if initial.iter().any(|p| !(*p >= 0.0)) || (initial.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return invalid("initial distribution must be a probability vector");
        }
        let chain = Self {
            transition,
            f,
            anchor,
            initial,
        };
        // every state reachable from the anchor must lead back to it
        let from_anchor = chain.reachable(anchor, false);
        let to_anchor = chain.reachable(anchor, true);
        if (0..n).any(|s| from_anchor[s] && !to_anchor[s]) {
            return invalid("chain restricted to states reachable from the anchor is reducible");
        }
        if (0..n).any(|s| chain.initial[s] > 0.0 && !to_anchor[s]) {
            return invalid("anchor unreachable from the initial distribution");
        }
        Ok(chain)
    }

    /// Two-state chain with `P(0->1) = a`, `P(1->0) = b`.
    pub fn two_state(a: f64, b: f64, f: [f64; 2], anchor: usize) -> Result<Self> {
        let mut initial = vec![0.0; 2];
        if anchor < 2 {
            initial[anchor] = 1.0;
        }
        Self::new(
            vec![vec![1.0 - a, a], vec![b, 1.0 - b]],
            f.to_vec(),
            anchor,
            initial,
        )
    }

    pub fn n_states(&self) -> usize {
        self.transition.len()
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.transition[i][j]
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n_states();
        DMatrix::from_fn(n, n, |i, j| self.transition[i][j])
    }

    /// States reachable from `start` (or, with `reverse`, states that can reach it).
    fn reachable(&self, start: usize, reverse: bool) -> Vec<bool> {
        let n = self.n_states();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                let edge = if reverse {
                    self.transition[j][i] > 0.0
                } else {
                    self.transition[i][j] > 0.0
                };
                if edge && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }

    pub fn is_irreducible(&self) -> bool {
        self.reachable(self.anchor, false).iter().all(|&b| b)
            && self.reachable(self.anchor, true).iter().all(|&b| b)
    }

    /// Period of the anchor's communicating class (gcd of `level(u)+1-level(v)`
    /// over edges, with BFS levels from the anchor).
    pub fn period(&self) -> usize {
        let n = self.n_states();
        let mut level = vec![usize::MAX; n];
        level[self.anchor] = 0;
        let mut queue = VecDeque::from([self.anchor]);
        let mut g = 0usize;
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if self.transition[i][j] <= 0.0 {
                    continue;
                }
                if level[j] == usize::MAX {
                    level[j] = level[i] + 1;
                    queue.push_back(j);
                } else {
                    let d = (level[i] + 1).abs_diff(level[j]);
                    g = gcd(g, d);
                }
            }
        }
        g.max(1)
    }

    /// Stationary distribution of the class containing the anchor (zero
    /// elsewhere).
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.n_states();
        let class: Vec<usize> = {
            let r = self.reachable(self.anchor, false);
            (0..n).filter(|&s| r[s]).collect()
        };
        let m = class.len();
        let mut a = DMatrix::<f64>::zeros(m, m);
        for (r, &j) in class.iter().enumerate() {
            for (c, &i) in class.iter().enumerate() {
                a[(r, c)] = self.transition[i][j] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for c in 0..m {
            a[(m - 1, c)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(m);
        rhs[m - 1] = 1.0;
        let sol = a
            .lu()
            .solve(&rhs)
            .expect("irreducible class has a unique stationary law");
        let mut pi = vec![0.0; n];
        for (k, &s) in class.iter().enumerate() {
            pi[s] = sol[k].max(0.0);
        }
        let z: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= z);
        pi
    }

    /// Exact `(length, sum)` law of one excursion from the anchor, enumerated
    /// up to `max_len` steps.
    pub fn block_law(&self, max_len: u64) -> Result<BlockLaw> {
        let fit = detect_lattice(&self.f)?;
        let n = self.n_states();
        let kmax = *fit.indices.iter().max().unwrap_or(&0) as usize;
        let a = self.anchor;
        // live[s][k]: mass at state s != anchor with accumulated index k
        let mut live: Vec<Vec<f64>> = vec![vec![0.0; 1]; n];
        let mut atoms = Vec::new();
        let mut remaining = 1.0;
        let mut width = 1usize;
        for len in 1..=max_len {
            let new_width = width + kmax;
            let mut next: Vec<Vec<f64>> = vec![vec![0.0; new_width]; n];
            let mut ret = vec![0.0; new_width];
            let sources: Vec<(usize, Vec<f64>)> = if len == 1 {
                let mut v = vec![0.0; width];
                v[0] = 1.0;
                vec![(a, v)]
            } else {
                (0..n)
                    .filter(|&s| s != a)
                    .map(|s| (s, std::mem::take(&mut live[s])))
                    .collect()
            };
            for (s, dist) in sources {
                for (t, row) in next.iter_mut().enumerate() {
                    let p = self.transition[s][t];
                    if p == 0.0 {
                        continue;
                    }
                    let shift = fit.indices[t] as usize;
                    let target = if t == a { &mut ret } else { row };
                    for (k, &m) in dist.iter().enumerate() {
                        if m != 0.0 {
                            target[k + shift] += m * p;
                        }
                    }
                }
            }
            for (k, &m) in ret.iter().enumerate() {
                if m > 0.0 {
                    atoms.push(BlockAtom {
                        length: len,
                        sum: len as f64 * fit.offset + fit.span * k as f64,
                        prob: m,
                    });
                    remaining -= m;
                }
            }
            live = next;
            width = new_width;
            let alive: f64 = live.iter().flatten().sum();
            remaining = alive.min(remaining.max(0.0));
            if alive < BLOCK_LAW_TAIL {
                return Ok(BlockLaw {
                    atoms,
                    tail_mass: alive,
                });
            }
        }
        let alive: f64 = live.iter().flatten().sum();
        Ok(BlockLaw {
            atoms,
            tail_mass: alive,
        })
    }

    /// Exact law of `X_n = sum_{i=1}^n f(zeta_i)`, with `zeta_0` drawn from the
    /// initial distribution or fixed at the anchor.
    pub fn value_law(&self, n: u64, from_initial: bool) -> Result<Vec<(f64, f64)>> {
        let fit = detect_lattice(&self.f)?;
        let s = self.n_states();
        let kmax = *fit.indices.iter().max().unwrap_or(&0) as usize;
        let levels = n as f64 * kmax as f64 + 1.0;
        if n as f64 * (s * s) as f64 * levels > EXACT_WORK_BUDGET {
            return Err(Error::ResourceLimit(format!(
                "exact Markov value law at n = {n} exceeds the work budget"
            )));
        }
        let mut dist: Vec<Vec<f64>> = (0..s)
            .map(|i| {
                let p = if from_initial {
                    self.initial[i]
                } else if i == self.anchor {
                    1.0
                } else {
                    0.0
                };
                vec![p]
            })
            .collect();
        let mut width = 1usize;
        for _ in 0..n {
            let new_width = width + kmax;
            let mut next = vec![vec![0.0; new_width]; s];
            for (i, row) in dist.iter().enumerate() {
                for (j, out) in next.iter_mut().enumerate() {
                    let p = self.transition[i][j];
                    if p == 0.0 {
                        continue;
                    }
                    let shift = fit.indices[j] as usize;
                    for (k, &m) in row.iter().enumerate() {
                        if m != 0.0 {
                            out[k + shift] += m * p;
                        }
                    }
                }
            }
            dist = next;
            width = new_width;
        }
        let mut atoms = Vec::new();
        for k in 0..width {
            let p: f64 = dist.iter().map(|row| row[k]).sum();
            if p > 0.0 {
                atoms.push((n as f64 * fit.offset + fit.span * k as f64, p));
            }
        }
        Ok(atoms)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Additive functional of a finite chain, regenerating at anchor returns.
#[derive(Debug, Clone)]
pub struct MarkovAdditiveModel {
    chain: FiniteMarkovChain,
    cumulative: Vec<Vec<f64>>,
    initial_cumulative: Vec<f64>,
}

fn cumulate(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    row.iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

fn pick(cum: &[f64], u: f64) -> usize {
    match cum.iter().position(|&c| u < c) {
        Some(i) => i,
        // rounding left the last cumulative entry just below one
        None => cum.iter().rposition(|_| true).unwrap_or(0),
    }
}

impl MarkovAdditiveModel {
    pub fn new(chain: FiniteMarkovChain) -> Result<Self> {
        let cumulative = chain.transition.iter().map(|r| cumulate(r)).collect();
        let initial_cumulative = cumulate(&chain.initial);
        Ok(Self {
            chain,
            cumulative,
            initial_cumulative,
        })
    }

    pub fn chain(&self) -> &FiniteMarkovChain {
        &self.chain
    }

    fn excursion(
        &self,
        mut state: usize,
        rng: &mut Stream,
        mut trace: Option<&mut Vec<f64>>,
    ) -> BlockSample {
        if let Some(t) = trace.as_deref_mut() {
            t.clear();
        }
        let mut length = 0u64;
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        loop {
            state = pick(&self.cumulative[state], rng.random());
            let v = self.chain.f[state];
            length += 1;
            sum += v;
            abs_sum += v.abs();
            if let Some(t) = trace.as_deref_mut() {
                t.push(v);
            }
            if state == self.chain.anchor {
                break;
            }
        }
        BlockSample {
            length,
            sum,
            abs_sum,
        }
    }
}

impl ProcessModel for MarkovAdditiveModel {
    fn draw_block(
        &mut self,
        kind: BlockKind,
        rng: &mut Stream,
        trace: Option<&mut Vec<f64>>,
    ) -> Result<BlockSample> {
        let start = match kind {
            BlockKind::Regular => self.chain.anchor,
            BlockKind::First => pick(&self.initial_cumulative, rng.random()),
        };
        Ok(self.excursion(start, rng, trace))
    }

    fn traces_increments(&self) -> bool {
        true
    }

    fn exact_block_law(&self) -> Option<BlockLaw> {
        if self.chain.n_states() > EXACT_MAX_STATES {
            return None;
        }
        let law = self.chain.block_law(EXACT_MAX_BLOCK_LEN).ok()?;
        (law.tail_mass < BLOCK_LAW_TAIL).then_some(law)
    }

    fn exact_value_law(&self, n: u64, include_first: bool) -> Result<Vec<(f64, f64)>> {
        self.chain.value_law(n, include_first)
    }

    fn closed_form_mu(&self) -> Option<f64> {
        let pi = self.chain.stationary();
        Some(pi.iter().zip(&self.chain.f).map(|(p, f)| p * f).sum())
    }
}
