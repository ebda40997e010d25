//! Weighted bipartite graphs, flow networks and the solutions defined on them.
//!
//! Indices are 0-based in memory and 1-based in the text format (see [`io`]).

pub mod io;

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Budgets and capacities are kept below this bound so that sums over a
/// desk-scale network never overflow an `i64`.
pub const INTEGER_BOUND: i64 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub left: usize,
    pub right: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(left: usize, right: usize, weight: f64) -> Self {
        Self { left, right, weight }
    }
}

/// A weighted bipartite graph with left nodes `u_0..u_{n_left}` and right nodes
/// `v_0..v_{n_right}`. Weights lie in `[0, 1]`. The sparse edge list is the
/// canonical form; see [`BipartiteInstance::zero_complete`].
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteInstance {
    pub n_left: usize,
    pub n_right: usize,
    pub edges: Vec<Edge>,
}

impl BipartiteInstance {
    /// Builds and validates an instance.
    pub fn new(n_left: usize, n_right: usize, edges: Vec<Edge>) -> Result<Self> {
        let inst = Self { n_left, n_right, edges };
        inst.validate()?;
        Ok(inst)
    }

    /// Complete instance from a row-major `n_left x n_right` weight matrix.
    pub fn from_matrix(n_left: usize, n_right: usize, weights: &[f64]) -> Result<Self> {
        if weights.len() != n_left * n_right {
            return Err(Error::Parameter(format!(
                "expected {} weights, got {}",
                n_left * n_right,
                weights.len()
            )));
        }
        let edges = (0..n_left)
            .flat_map(|i| (0..n_right).map(move |j| (i, j)))
            .map(|(i, j)| Edge::new(i, j, weights[i * n_right + j]))
            .collect();
        Self::new(n_left, n_right, edges)
    }

    /// Checks every type invariant and names the first violated one.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            if e.left >= self.n_left || e.right >= self.n_right {
                return Err(Error::Invalid(format!(
                    "edge {} ({}, {}) index out of range",
                    k + 1,
                    e.left + 1,
                    e.right + 1
                )));
            }
            if !(0.0..=1.0).contains(&e.weight) {
                return Err(Error::Invalid(format!(
                    "weight out of [0,1]: edge ({}, {}) has weight {}",
                    e.left + 1,
                    e.right + 1,
                    e.weight
                )));
            }
            if !seen.insert((e.left, e.right)) {
                return Err(Error::Invalid(format!(
                    "duplicate edge ({}, {})",
                    e.left + 1,
                    e.right + 1
                )));
            }
        }
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// True when every `(i, j)` pair is present.
    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.n_left * self.n_right
    }

    /// Weight of edge `(i, j)`, if present.
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.edges
            .iter()
            .find(|e| e.left == i && e.right == j)
            .map(|e| e.weight)
    }

    /// Dense row-major weight matrix; `None` marks a missing edge.
    pub fn weight_matrix(&self) -> Vec<Option<f64>> {
        let mut m = vec![None; self.n_left * self.n_right];
        for e in &self.edges {
            m[e.left * self.n_right + e.right] = Some(e.weight);
        }
        m
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::new(self)
    }

    /// Adds every missing `(i, j)` pair with weight exactly 0. Existing edges
    /// keep their order and weight; new edges follow in row-major order.
    pub fn zero_complete(&self) -> Result<Self> {
        if self.n_left != self.n_right {
            return Err(Error::Parameter(format!(
                "zero completion needs a square instance, got {}x{}",
                self.n_left, self.n_right
            )));
        }
        let present = self.weight_matrix();
        let mut edges = self.edges.clone();
        for i in 0..self.n_left {
            for j in 0..self.n_right {
                if present[i * self.n_right + j].is_none() {
                    edges.push(Edge::new(i, j, 0.0));
                }
            }
        }
        Ok(Self { n_left: self.n_left, n_right: self.n_right, edges })
    }

    /// Disjoint union: `other`'s nodes are shifted past this instance's nodes.
    pub fn disjoint_union(&self, other: &Self) -> Self {
        let mut edges = self.edges.clone();
        edges.extend(
            other
                .edges
                .iter()
                .map(|e| Edge::new(e.left + self.n_left, e.right + self.n_right, e.weight)),
        );
        Self {
            n_left: self.n_left + other.n_left,
            n_right: self.n_right + other.n_right,
            edges,
        }
    }

    /// Same graph with every weight multiplied by `factor`. The result is not
    /// validated, so factors above 1 are allowed for scaling checks.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n_left: self.n_left,
            n_right: self.n_right,
            edges: self
                .edges
                .iter()
                .map(|e| Edge::new(e.left, e.right, e.weight * factor))
                .collect(),
        }
    }
}

/// Neighbor lists sorted by neighbor index. Each entry is
/// `(neighbor, weight, edge index)`.
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub left: Vec<Vec<(usize, f64, usize)>>,
    pub right: Vec<Vec<(usize, f64, usize)>>,
}

impl Adjacency {
    pub fn new(inst: &BipartiteInstance) -> Self {
        let mut left = vec![Vec::new(); inst.n_left];
        let mut right = vec![Vec::new(); inst.n_right];
        for (k, e) in inst.edges.iter().enumerate() {
            left[e.left].push((e.right, e.weight, k));
            right[e.right].push((e.left, e.weight, k));
        }
        for l in left.iter_mut().chain(right.iter_mut()) {
            l.sort_by_key(|&(nb, _, _)| nb);
        }
        Self { left, right }
    }

    pub fn max_degree(&self) -> usize {
        self.left
            .iter()
            .chain(self.right.iter())
            .map(Vec::len)
            .max()
            .unwrap_or(0)
    }
}

/// A set of vertex-disjoint edges, stored as sorted `(left, right)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub weight: f64,
}

impl Matching {
    pub fn empty() -> Self {
        Self { pairs: Vec::new(), weight: 0.0 }
    }

    /// Builds a matching on `inst`, checking edge membership and disjointness.
    pub fn from_pairs(inst: &BipartiteInstance, pairs: &[(usize, usize)]) -> Result<Self> {
        let matrix = inst.weight_matrix();
        let mut used_left = vec![false; inst.n_left];
        let mut used_right = vec![false; inst.n_right];
        let mut weight = 0.0;
        for &(i, j) in pairs {
            if i >= inst.n_left || j >= inst.n_right {
                return Err(Error::Parameter(format!("pair ({}, {}) out of range", i + 1, j + 1)));
            }
            let w = matrix[i * inst.n_right + j]
                .ok_or_else(|| Error::Parameter(format!("({}, {}) is not an edge", i + 1, j + 1)))?;
            if used_left[i] || used_right[j] {
                return Err(Error::Parameter(format!(
                    "pair ({}, {}) shares a node with another pair",
                    i + 1,
                    j + 1
                )));
            }
            used_left[i] = true;
            used_right[j] = true;
            weight += w;
        }
        let mut pairs = pairs.to_vec();
        pairs.sort_unstable();
        Ok(Self { pairs, weight })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Partner of each left node, `None` when unmatched.
    pub fn left_partners(&self, n_left: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_left];
        for &(i, j) in &self.pairs {
            out[i] = Some(j);
        }
        out
    }

    /// Size of the symmetric difference of the two edge sets, i.e. the L1
    /// distance of the incidence vectors.
    pub fn l1_distance(&self, other: &Matching) -> usize {
        let a: HashSet<_> = self.pairs.iter().collect();
        let b: HashSet<_> = other.pairs.iter().collect();
        a.symmetric_difference(&b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowEdge {
    pub tail: usize,
    pub head: usize,
    pub capacity: i64,
    pub cost: f64,
}

impl FlowEdge {
    pub fn new(tail: usize, head: usize, capacity: i64, cost: f64) -> Self {
        Self { tail, head, capacity, cost }
    }
}

/// Directed network with integer node budgets (`out - in = b_v`), integer
/// capacities and costs in `[0, 1]`. Parallel edges are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    pub budgets: Vec<i64>,
    pub edges: Vec<FlowEdge>,
}

impl FlowNetwork {
    pub fn new(budgets: Vec<i64>, edges: Vec<FlowEdge>) -> Result<Self> {
        let net = Self { budgets, edges };
        net.validate()?;
        Ok(net)
    }

    pub fn node_count(&self) -> usize {
        self.budgets.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.budgets.len();
        for (v, &b) in self.budgets.iter().enumerate() {
            if b.abs() >= INTEGER_BOUND {
                return Err(Error::Invalid(format!("budget of node {} exceeds 2^31", v + 1)));
            }
        }
        for (k, e) in self.edges.iter().enumerate() {
            if e.tail >= n || e.head >= n {
                return Err(Error::Invalid(format!("edge {} endpoint out of range", k + 1)));
            }
            if e.tail == e.head {
                return Err(Error::Invalid(format!("edge {} is a self-loop", k + 1)));
            }
            if e.capacity < 0 {
                return Err(Error::Invalid(format!("edge {} has negative capacity", k + 1)));
            }
            if e.capacity >= INTEGER_BOUND {
                return Err(Error::Invalid(format!("edge {} capacity exceeds 2^31", k + 1)));
            }
            if !(0.0..=1.0).contains(&e.cost) {
                return Err(Error::Invalid(format!(
                    "cost out of [0,1]: edge {} has cost {}",
                    k + 1,
                    e.cost
                )));
            }
        }
        if self.budgets.iter().sum::<i64>() != 0 {
            return Err(Error::Invalid("budgets do not sum to 0".into()));
        }
        Ok(())
    }

    /// Min-cost perfect matching network for a square instance: `u_i` supplies
    /// one unit, `v_j` demands one, and edge `u_i -> v_j` costs `1 - w_ij`.
    pub fn from_perfect_matching(inst: &BipartiteInstance) -> Result<Self> {
        if inst.n_left != inst.n_right {
            return Err(Error::Parameter("perfect matching reduction needs n_left = n_right".into()));
        }
        let n = inst.n_left;
        let budgets = (0..2 * n).map(|v| if v < n { 1 } else { -1 }).collect();
        let edges = inst
            .edges
            .iter()
            .map(|e| FlowEdge::new(e.left, n + e.right, 1, 1.0 - e.weight))
            .collect();
        Self::new(budgets, edges)
    }
}

/// Integer flow value per edge of a [`FlowNetwork`], in edge order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntegerFlow {
    pub flow: Vec<i64>,
}

impl IntegerFlow {
    pub fn zero(net: &FlowNetwork) -> Self {
        Self { flow: vec![0; net.edges.len()] }
    }

    pub fn cost(&self, net: &FlowNetwork) -> f64 {
        net.edges
            .iter()
            .zip(&self.flow)
            .map(|(e, &f)| e.cost * f as f64)
            .sum()
    }

    /// Checks capacity and budget constraints.
    pub fn check_feasible(&self, net: &FlowNetwork) -> Result<()> {
        if self.flow.len() != net.edges.len() {
            return Err(Error::Infeasible(format!(
                "flow has {} entries for {} edges",
                self.flow.len(),
                net.edges.len()
            )));
        }
        let mut balance = vec![0i64; net.budgets.len()];
        for (k, (e, &f)) in net.edges.iter().zip(&self.flow).enumerate() {
            if f < 0 || f > e.capacity {
                return Err(Error::Infeasible(format!(
                    "edge {} carries {} outside [0, {}]",
                    k + 1,
                    f,
                    e.capacity
                )));
            }
            balance[e.tail] += f;
            balance[e.head] -= f;
        }
        for (v, (&got, &want)) in balance.iter().zip(&net.budgets).enumerate() {
            if got != want {
                return Err(Error::Infeasible(format!(
                    "node {} has net outflow {} but budget {}",
                    v + 1,
                    got,
                    want
                )));
            }
        }
        Ok(())
    }
}

/// Either kind of instance, as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Bipartite(BipartiteInstance),
    Flow(FlowNetwork),
}

impl Instance {
    pub fn validate(&self) -> Result<()> {
        match self {
            Instance::Bipartite(b) => b.validate(),
            Instance::Flow(f) => f.validate(),
        }
    }
}
