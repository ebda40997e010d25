//! Max-product belief propagation for maximum-weight bipartite matching.
//!
//! Node `u_i` sends `v_j` a vector indexed by the left nodes adjacent to
//! `v_j`: entry `i` says "`v_j` is matched to me", every other entry says
//! "`v_j` is matched elsewhere". All entries `r != i` share one value, so a
//! message is stored as the pair [`Msg`] `{ matched, other }`. Backward
//! messages from `v_j` to `u_i` are indexed by the right nodes adjacent to
//! `u_i` in the same way.
//!
//! For `t >= 1`:
//!
//! ```text
//! fwd_ij(i)   = w_ij + sum_{k != j} bwd_ki(j)
//! fwd_ij(r)   = max_{q != j} [ w_iq + sum_{k != j} bwd_ki(q) ]      (r != i)
//! b_ui(r)     = w_ir + sum_k bwd_ki(r)
//! ```
//!
//! and symmetrically for backward messages and right beliefs. A maximum over
//! an empty set is `-inf`. On sparse instances messages run only along the
//! existing edges.

use std::io::Write;

use crate::error::Result;
use crate::instance::{Adjacency, BipartiteInstance, Matching};

/// Absolute tolerance under which two belief entries count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Msg {
    pub matched: f64,
    pub other: f64,
}

/// Messages after iteration `t`. `forward[e]` goes from the left end of edge
/// `e` to its right end, `backward[e]` the other way.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub t: usize,
    pub forward: Vec<Msg>,
    pub backward: Vec<Msg>,
    pub normalized: bool,
}

/// Belief vectors. `left[i][r]` is `b_{u_i}(r)` for right node `r`, and
/// `right[j][r]` is `b_{v_j}(r)` for left node `r`. Non-neighbors are `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefSet {
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
}

/// Per-left-node argmax decoding of a belief set.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub assignment: Vec<Option<usize>>,
    pub is_matching: bool,
    pub tie_detected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// First iteration of the stable window, `None` when censored.
    pub tau: Option<usize>,
    pub converged: bool,
    /// Index of the last iteration that was decoded.
    pub last_iteration: usize,
    pub final_assignment: Vec<Option<usize>>,
    pub is_matching: bool,
    pub matched_oracle: Option<bool>,
    pub tie_detected: bool,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub t_max: usize,
    pub window: usize,
    pub normalized: bool,
    /// Left partner of every left node in the reference optimum. When set,
    /// only windows that decode to this assignment count as converged.
    pub oracle: Option<Vec<Option<usize>>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { t_max: 10_000, window: 4, normalized: true, oracle: None }
    }
}

impl RunOptions {
    pub fn new(t_max: usize, window: usize) -> Self {
        Self { t_max, window, ..Self::default() }
    }

    pub fn raw(mut self) -> Self {
        self.normalized = false;
        self
    }

    pub fn with_oracle(mut self, optimum: &Matching, n_left: usize) -> Self {
        self.oracle = Some(optimum.left_partners(n_left));
        self
    }
}

/// Sum of a list of values that may contain `-inf`, supporting the sum with
/// one or two entries left out without cancelling infinities.
#[derive(Clone, Copy)]
struct Totals {
    finite: f64,
    neg_inf: usize,
}

impl Totals {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let mut t = Totals { finite: 0.0, neg_inf: 0 };
        for v in values {
            if v == f64::NEG_INFINITY {
                t.neg_inf += 1;
            } else {
                t.finite += v;
            }
        }
        t
    }

    fn without(&self, skip: &[f64]) -> f64 {
        let inf = skip.iter().filter(|&&v| v == f64::NEG_INFINITY).count();
        if self.neg_inf > inf {
            f64::NEG_INFINITY
        } else {
            skip.iter()
                .filter(|v| v.is_finite())
                .fold(self.finite, |acc, v| acc - v)
        }
    }
}

/// Outgoing messages of one node. `incoming[k]` is `(w_k, message from
/// neighbor k)`; `out[j]` receives the message to neighbor `j`.
fn node_update(incoming: &[(f64, Msg)], out: &mut [Msg]) {
    let totals = Totals::of(incoming.iter().map(|(_, m)| m.other));
    for (j, slot) in out.iter_mut().enumerate() {
        let (w_j, m_j) = incoming[j];
        let matched = w_j + totals.without(&[m_j.other]);
        let mut other = f64::NEG_INFINITY;
        for (q, &(w_q, m_q)) in incoming.iter().enumerate() {
            if q == j {
                continue;
            }
            let v = w_q + m_q.matched + totals.without(&[m_j.other, m_q.other]);
            if v > other {
                other = v;
            }
        }
        *slot = Msg { matched, other };
    }
}

fn node_beliefs(incoming: &[(f64, Msg)]) -> impl Iterator<Item = f64> + '_ {
    let totals = Totals::of(incoming.iter().map(|(_, m)| m.other));
    incoming
        .iter()
        .map(move |&(w, m)| w + m.matched + totals.without(&[m.other]))
}

/// Subtracts the largest entry of the vector from every entry. `other` is an
/// entry only when the receiver has another neighbor.
fn normalize(m: &mut Msg, receiver_degree: usize) {
    let top = if receiver_degree >= 2 { m.matched.max(m.other) } else { m.matched };
    if top.is_finite() {
        m.matched -= top;
        m.other -= top;
    }
}

/// Argmax with smallest-index tie-break over `(index, value)` pairs.
fn argmax(entries: impl Iterator<Item = (usize, f64)>) -> (Option<usize>, bool) {
    let mut best: Option<(usize, f64)> = None;
    let mut runner_up = f64::NEG_INFINITY;
    for (r, v) in entries {
        match best {
            Some((_, b)) if v > b => {
                runner_up = b;
                best = Some((r, v));
            }
            Some(_) => runner_up = runner_up.max(v),
            None => best = Some((r, v)),
        }
    }
    match best {
        Some((r, b)) if b > f64::NEG_INFINITY => {
            let tie = runner_up.is_finite() && b - runner_up <= TIE_TOLERANCE;
            (Some(r), tie)
        }
        // every entry is -inf
        Some(_) => (None, true),
        None => (None, false),
    }
}

/// BP engine bound to one instance.
#[derive(Debug, Clone)]
pub struct BpMatching<'a> {
    inst: &'a BipartiteInstance,
    adj: Adjacency,
}

impl<'a> BpMatching<'a> {
    pub fn new(inst: &'a BipartiteInstance) -> Result<Self> {
        inst.validate()?;
        Ok(Self { inst, adj: inst.adjacency() })
    }

    pub fn instance(&self) -> &BipartiteInstance {
        self.inst
    }

    /// `fwd_ij(i) = w_ij`, `fwd_ij(r) = 0` otherwise; likewise backward.
    pub fn init_messages(&self, normalized: bool) -> MessageState {
        let msgs: Vec<Msg> = self
            .inst
            .edges
            .iter()
            .map(|e| Msg { matched: e.weight, other: 0.0 })
            .collect();
        let mut state = MessageState { t: 0, forward: msgs.clone(), backward: msgs, normalized };
        if normalized {
            self.normalize_all(&mut state);
        }
        state
    }

    fn normalize_all(&self, state: &mut MessageState) {
        for (k, e) in self.inst.edges.iter().enumerate() {
            normalize(&mut state.forward[k], self.adj.right[e.right].len());
            normalize(&mut state.backward[k], self.adj.left[e.left].len());
        }
    }

    fn incoming_left(&self, state: &MessageState, i: usize, buf: &mut Vec<(f64, Msg)>) {
        buf.clear();
        buf.extend(self.adj.left[i].iter().map(|&(_, w, e)| (w, state.backward[e])));
    }

    fn incoming_right(&self, state: &MessageState, j: usize, buf: &mut Vec<(f64, Msg)>) {
        buf.clear();
        buf.extend(self.adj.right[j].iter().map(|&(_, w, e)| (w, state.forward[e])));
    }

    /// One synchronous iteration, writing into `next`.
    pub fn step_into(&self, state: &MessageState, next: &mut MessageState) {
        let mut incoming = Vec::new();
        let mut out = Vec::new();
        next.forward.resize(state.forward.len(), Msg { matched: 0.0, other: 0.0 });
        next.backward.resize(state.backward.len(), Msg { matched: 0.0, other: 0.0 });
        for i in 0..self.inst.n_left {
            self.incoming_left(state, i, &mut incoming);
            out.resize(incoming.len(), Msg { matched: 0.0, other: 0.0 });
            node_update(&incoming, &mut out);
            for (&(_, _, e), m) in self.adj.left[i].iter().zip(&out) {
                next.forward[e] = *m;
            }
        }
        for j in 0..self.inst.n_right {
            self.incoming_right(state, j, &mut incoming);
            out.resize(incoming.len(), Msg { matched: 0.0, other: 0.0 });
            node_update(&incoming, &mut out);
            for (&(_, _, e), m) in self.adj.right[j].iter().zip(&out) {
                next.backward[e] = *m;
            }
        }
        next.t = state.t + 1;
        next.normalized = state.normalized;
        if next.normalized {
            self.normalize_all(next);
        }
    }

    pub fn step(&self, state: &MessageState) -> MessageState {
        let mut next = state.clone();
        self.step_into(state, &mut next);
        next
    }

    pub fn beliefs(&self, state: &MessageState) -> BeliefSet {
        let mut incoming = Vec::new();
        let mut left = vec![vec![f64::NEG_INFINITY; self.inst.n_right]; self.inst.n_left];
        for (i, row) in left.iter_mut().enumerate() {
            self.incoming_left(state, i, &mut incoming);
            for (&(r, _, _), b) in self.adj.left[i].iter().zip(node_beliefs(&incoming)) {
                row[r] = b;
            }
        }
        let mut right = vec![vec![f64::NEG_INFINITY; self.inst.n_left]; self.inst.n_right];
        for (j, row) in right.iter_mut().enumerate() {
            self.incoming_right(state, j, &mut incoming);
            for (&(r, _, _), b) in self.adj.right[j].iter().zip(node_beliefs(&incoming)) {
                row[r] = b;
            }
        }
        BeliefSet { left, right }
    }

    /// Forward message `u_i -> v_j` of edge `e` as a vector over left nodes.
    pub fn forward_vector(&self, state: &MessageState, e: usize) -> Vec<f64> {
        let edge = self.inst.edges[e];
        let mut v = vec![f64::NEG_INFINITY; self.inst.n_left];
        for &(r, _, _) in &self.adj.right[edge.right] {
            v[r] = if r == edge.left { state.forward[e].matched } else { state.forward[e].other };
        }
        v
    }

    /// Backward message `v_j -> u_i` of edge `e` as a vector over right nodes.
    pub fn backward_vector(&self, state: &MessageState, e: usize) -> Vec<f64> {
        let edge = self.inst.edges[e];
        let mut v = vec![f64::NEG_INFINITY; self.inst.n_right];
        for &(r, _, _) in &self.adj.left[edge.left] {
            v[r] = if r == edge.right { state.backward[e].matched } else { state.backward[e].other };
        }
        v
    }

    /// Decodes the left beliefs of `state` without materializing them.
    pub fn decode(&self, state: &MessageState) -> Decoded {
        let mut incoming = Vec::new();
        let mut assignment = Vec::with_capacity(self.inst.n_left);
        let mut tie_detected = false;
        for i in 0..self.inst.n_left {
            self.incoming_left(state, i, &mut incoming);
            let entries = self.adj.left[i].iter().map(|&(r, _, _)| r).zip(node_beliefs(&incoming));
            let (a, tie) = argmax(entries);
            assignment.push(a);
            tie_detected |= tie;
        }
        let is_matching = injective(&assignment, self.inst.n_right);
        Decoded { assignment, is_matching, tie_detected }
    }

    pub fn run(&self, opts: &RunOptions) -> RunResult {
        self.run_inner(opts, None)
            .expect("running without a trace sink cannot fail")
    }

    /// Like [`BpMatching::run`], also writing `t,node,entries...` CSV rows
    /// with every belief vector of every iteration to `trace`.
    pub fn run_traced(&self, opts: &RunOptions, trace: &mut dyn Write) -> Result<RunResult> {
        writeln!(trace, "t,node,beliefs")?;
        self.run_inner(opts, Some(trace))
    }

    fn run_inner(&self, opts: &RunOptions, mut trace: Option<&mut dyn Write>) -> Result<RunResult> {
        let window = opts.window.max(1);
        let mut state = self.init_messages(opts.normalized);
        let mut next = state.clone();
        let mut prev: Option<Vec<Option<usize>>> = None;
        let mut run_len = 0usize;
        let mut tie_detected = false;
        let mut t = 0usize;
        loop {
            if let Some(w) = trace.as_deref_mut() {
                write_trace(w, t, &self.beliefs(&state))?;
            }
            let dec = self.decode(&state);
            tie_detected |= dec.tie_detected;
            let valid = dec.is_matching
                && dec
                    .assignment
                    .iter()
                    .zip(&self.adj.left)
                    .all(|(a, nb)| a.is_some() || nb.is_empty())
                && opts.oracle.as_ref().is_none_or(|o| *o == dec.assignment);
            run_len = if valid && prev.as_ref() == Some(&dec.assignment) {
                run_len + 1
            } else if valid {
                1
            } else {
                0
            };
            let done = run_len >= window;
            if done || t >= opts.t_max {
                let matched_oracle = opts.oracle.as_ref().map(|o| *o == dec.assignment);
                return Ok(RunResult {
                    tau: done.then(|| t + 1 - window),
                    converged: done,
                    last_iteration: t,
                    is_matching: dec.is_matching,
                    final_assignment: dec.assignment,
                    matched_oracle,
                    tie_detected,
                });
            }
            prev = Some(dec.assignment);
            self.step_into(&state, &mut next);
            std::mem::swap(&mut state, &mut next);
            t += 1;
        }
    }
}

fn injective(assignment: &[Option<usize>], n_right: usize) -> bool {
    let mut used = vec![false; n_right];
    for &j in assignment.iter().flatten() {
        if std::mem::replace(&mut used[j], true) {
            return false;
        }
    }
    true
}

fn write_trace(w: &mut dyn Write, t: usize, beliefs: &BeliefSet) -> Result<()> {
    let rows = beliefs
        .left
        .iter()
        .enumerate()
        .map(|(i, b)| (format!("u{}", i + 1), b))
        .chain(beliefs.right.iter().enumerate().map(|(j, b)| (format!("v{}", j + 1), b)));
    for (name, b) in rows {
        let entries: Vec<String> = b.iter().map(|x| format!("{x:.17e}")).collect();
        writeln!(w, "{t},{name},{}", entries.join(","))?;
    }
    Ok(())
}

/// Argmax decoding of left beliefs with smallest-index tie-break.
pub fn estimate_matching(beliefs: &BeliefSet) -> Decoded {
    let mut tie_detected = false;
    let assignment: Vec<Option<usize>> = beliefs
        .left
        .iter()
        .map(|row| {
            let (a, tie) = argmax(row.iter().copied().enumerate().filter(|(_, v)| *v > f64::NEG_INFINITY));
            let (a, tie) = if a.is_none() && row.iter().all(|v| *v == f64::NEG_INFINITY) {
                (None, false)
            } else {
                (a, tie)
            };
            tie_detected |= tie;
            a
        })
        .collect();
    let n_right = beliefs.right.len().max(
        beliefs.left.first().map_or(0, Vec::len),
    );
    let is_matching = injective(&assignment, n_right);
    Decoded { assignment, is_matching, tie_detected }
}

/// Runs BP on `inst` with the given options.
pub fn run(inst: &BipartiteInstance, opts: &RunOptions) -> Result<RunResult> {
    Ok(BpMatching::new(inst)?.run(opts))
}
