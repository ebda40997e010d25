//! Computation trees and maximum-weight T-matchings.
//!
//! `T^k(x)` has height `k + 1`. The root is labeled `x` and its children are
//! the neighbors of `x`. Every other node at depth `<= k` labeled `y` gets one
//! child per neighbor of `y` other than its parent's label.
//!
//! A T-matching covers every node at depth `<= k` exactly once; nodes at depth
//! `k + 1` (the frontier) may stay uncovered. On sparse graphs a node above
//! the frontier can be childless; it can only be covered by its parent edge.

use std::fmt::Write as _;

use crate::bp::TIE_TOLERANCE;
use crate::error::{Error, Result};
use crate::generators::FamilySpec;
use crate::instance::BipartiteInstance;

pub const DEFAULT_NODE_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Left(usize),
    Right(usize),
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Left(i) | Label::Right(i) => i,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Left(i) => write!(f, "u{}", i + 1),
            Label::Right(j) => write!(f, "v{}", j + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub label: Label,
    pub parent: Option<usize>,
    /// Weight of the edge to the parent, 0 for the root.
    pub weight: f64,
    /// Instance edge index of the edge to the parent.
    pub edge: Option<usize>,
    pub depth: usize,
    pub children: Vec<usize>,
}

/// Arena-allocated tree in breadth-first order, so every child has a larger
/// index than its parent.
#[derive(Debug, Clone, PartialEq)]
pub struct CompTree {
    pub k: usize,
    pub nodes: Vec<TreeNode>,
}

/// A T-matching given by the child endpoint of each chosen tree edge.
#[derive(Debug, Clone, PartialEq)]
pub struct TMatching {
    pub edges: Vec<usize>,
    pub weight: f64,
    pub tie_detected: bool,
}

fn neighbors(inst: &BipartiteInstance, label: Label) -> Vec<(Label, f64, usize)> {
    let mut out: Vec<(Label, f64, usize)> = inst
        .edges
        .iter()
        .enumerate()
        .filter_map(|(e, ed)| match label {
            Label::Left(i) if ed.left == i => Some((Label::Right(ed.right), ed.weight, e)),
            Label::Right(j) if ed.right == j => Some((Label::Left(ed.left), ed.weight, e)),
            _ => None,
        })
        .collect();
    out.sort_by_key(|n| n.0);
    out
}

pub fn build_tree(inst: &BipartiteInstance, root: Label, k: usize) -> Result<CompTree> {
    build_tree_capped(inst, root, k, DEFAULT_NODE_CAP)
}

pub fn build_tree_capped(
    inst: &BipartiteInstance,
    root: Label,
    k: usize,
    cap: usize,
) -> Result<CompTree> {
    inst.validate()?;
    let in_range = match root {
        Label::Left(i) => i < inst.n_left,
        Label::Right(j) => j < inst.n_right,
    };
    if !in_range {
        return Err(Error::Parameter(format!("root {root} is not a node of the instance")));
    }
    let left: Vec<_> = (0..inst.n_left).map(|i| neighbors(inst, Label::Left(i))).collect();
    let right: Vec<_> = (0..inst.n_right).map(|j| neighbors(inst, Label::Right(j))).collect();
    let nbrs = |l: Label| match l {
        Label::Left(i) => &left[i],
        Label::Right(j) => &right[j],
    };

    let mut nodes = vec![TreeNode {
        label: root,
        parent: None,
        weight: 0.0,
        edge: None,
        depth: 0,
        children: Vec::new(),
    }];
    let mut head = 0;
    while head < nodes.len() {
        let (label, depth, parent_label) = {
            let n = &nodes[head];
            (n.label, n.depth, n.parent.map(|p| nodes[p].label))
        };
        if depth <= k {
            for &(nl, w, e) in nbrs(label) {
                if Some(nl) == parent_label {
                    continue;
                }
                if nodes.len() >= cap {
                    return Err(Error::Cap(format!(
                        "computation tree of depth {} at {root} exceeds {cap} nodes",
                        k + 1
                    )));
                }
                let id = nodes.len();
                nodes.push(TreeNode {
                    label: nl,
                    parent: Some(head),
                    weight: w,
                    edge: Some(e),
                    depth: depth + 1,
                    children: Vec::new(),
                });
                nodes[head].children.push(id);
            }
        }
        head += 1;
    }
    Ok(CompTree { k, nodes })
}

/// `free` = best weight of the subtree when the node is not matched to its
/// parent, `taken` = best weight when it is.
struct Dp {
    free: Vec<f64>,
    taken: Vec<f64>,
}

fn best_child(tree: &CompTree, dp: &Dp, x: usize) -> (Option<usize>, f64, bool) {
    let ch = &tree.nodes[x].children;
    let mut best: Option<(usize, f64)> = None;
    let mut tie = false;
    for (pos, &c) in ch.iter().enumerate() {
        let rest: f64 = ch
            .iter()
            .enumerate()
            .filter(|&(p, _)| p != pos)
            .map(|(_, &o)| dp.free[o])
            .sum();
        let v = tree.nodes[c].weight + dp.taken[c] + rest;
        match best {
            Some((_, b)) if v > b => {
                tie = v - b <= TIE_TOLERANCE;
                best = Some((c, v));
            }
            Some((_, b)) => tie |= v > f64::NEG_INFINITY && b - v <= TIE_TOLERANCE,
            None => best = Some((c, v)),
        }
    }
    match best {
        Some((c, v)) if v > f64::NEG_INFINITY => (Some(c), v, tie),
        _ => (None, f64::NEG_INFINITY, false),
    }
}

impl CompTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    fn is_frontier(&self, x: usize) -> bool {
        self.nodes[x].depth == self.k + 1
    }

    fn dp(&self) -> Dp {
        let n = self.nodes.len();
        let mut dp = Dp { free: vec![0.0; n], taken: vec![0.0; n] };
        for x in (0..n).rev() {
            let ch = &self.nodes[x].children;
            dp.taken[x] = ch.iter().map(|&c| dp.free[c]).sum();
            dp.free[x] = if ch.is_empty() {
                if self.is_frontier(x) { 0.0 } else { f64::NEG_INFINITY }
            } else {
                best_child(self, &dp, x).1
            };
        }
        dp
    }

    /// Weight of the best T-matching, optionally forced to use the root
    /// edge to the child labeled `forced`. `-inf` when infeasible.
    pub fn max_weight(&self, forced: Option<Label>) -> f64 {
        self.max_t_matching(forced).weight
    }

    /// `t^k(root; r)` for every root child label `r`, in child order.
    pub fn root_values(&self) -> Vec<(Label, f64)> {
        let dp = self.dp();
        let ch = &self.nodes[0].children;
        ch.iter()
            .map(|&c| {
                let rest: f64 = ch.iter().filter(|&&o| o != c).map(|&o| dp.free[o]).sum();
                (self.nodes[c].label, self.nodes[c].weight + dp.taken[c] + rest)
            })
            .collect()
    }

    pub fn max_t_matching(&self, forced: Option<Label>) -> TMatching {
        let dp = self.dp();
        let mut edges = Vec::new();
        let mut tie_detected = false;
        let root_choice = match forced {
            Some(l) => {
                let c = self.nodes[0].children.iter().copied().find(|&c| self.nodes[c].label == l);
                match c {
                    Some(c) => {
                        let rest: f64 = self.nodes[0]
                            .children
                            .iter()
                            .filter(|&&o| o != c)
                            .map(|&o| dp.free[o])
                            .sum();
                        let w = self.nodes[c].weight + dp.taken[c] + rest;
                        if w == f64::NEG_INFINITY {
                            None
                        } else {
                            Some((c, w))
                        }
                    }
                    None => None,
                }
            }
            None => {
                let (c, w, tie) = best_child(self, &dp, 0);
                tie_detected |= tie;
                c.map(|c| (c, w))
            }
        };
        let Some((rc, weight)) = root_choice else {
            return TMatching { edges, weight: f64::NEG_INFINITY, tie_detected };
        };
        // (node, matched to parent)
        let mut stack = vec![(rc, true)];
        for &o in &self.nodes[0].children {
            if o != rc {
                stack.push((o, false));
            }
        }
        edges.push(rc);
        while let Some((x, matched_up)) = stack.pop() {
            let chosen = if matched_up || self.nodes[x].children.is_empty() {
                None
            } else {
                let (c, _, tie) = best_child(self, &dp, x);
                tie_detected |= tie;
                c
            };
            if let Some(c) = chosen {
                edges.push(c);
            }
            for &c in &self.nodes[x].children {
                stack.push((c, Some(c) == chosen));
            }
        }
        edges.sort_unstable();
        TMatching { edges, weight, tie_detected }
    }

    /// Checks the T-matching rules and returns the total weight.
    pub fn check_t_matching(&self, edges: &[usize]) -> Result<f64> {
        let mut cover = vec![0u8; self.nodes.len()];
        let mut weight = 0.0;
        for &c in edges {
            let p = self.nodes.get(c).and_then(|n| n.parent).ok_or_else(|| {
                Error::Invalid(format!("tree node {c} has no parent edge"))
            })?;
            cover[c] += 1;
            cover[p] += 1;
            weight += self.nodes[c].weight;
        }
        for (x, &k) in cover.iter().enumerate() {
            if k > 1 {
                return Err(Error::Invalid(format!("tree node {x} covered twice")));
            }
            if k == 0 && !self.is_frontier(x) {
                return Err(Error::Invalid(format!("non-leaf tree node {x} uncovered")));
            }
        }
        Ok(weight)
    }

    /// Graphviz dump, chosen edges drawn bold.
    pub fn to_dot(&self, matching: Option<&TMatching>) -> String {
        let mut s = String::from("graph T {\n");
        for (x, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "  n{x} [label=\"{}\"];", n.label);
        }
        for (x, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                let bold = matching.is_some_and(|m| m.edges.binary_search(&x).is_ok());
                let style = if bold { ", style=bold" } else { "" };
                let _ = writeln!(s, "  n{p} -- n{x} [label=\"{}\"{style}];", n.weight);
            }
        }
        s.push_str("}\n");
        s
    }
}

/// True iff the T-matching uses no light edge of a `SmoothedKnn` instance.
pub fn light_edge_audit(
    tree: &CompTree,
    inst: &BipartiteInstance,
    tmatching: &TMatching,
    family: &FamilySpec,
) -> Result<bool> {
    for &c in &tmatching.edges {
        let e = tree.nodes[c]
            .edge
            .ok_or_else(|| Error::Invalid(format!("tree node {c} has no parent edge")))?;
        let ed = inst.edges[e];
        if !family.is_heavy(ed.left, ed.right)? {
            return Ok(false);
        }
    }
    // a matching without edges still needs the family to be classifiable
    family.is_heavy(0, 0)?;
    Ok(true)
}

/// `t^k(root; r)` for instances of maximum degree at most 2, where every
/// branch of the tree is a path. Runs in `O(k)` time without building the
/// tree. Returns `(r, value)` for every neighbor `r` of the root.
pub fn path_root_values(inst: &BipartiteInstance, root: Label, k: usize) -> Result<Vec<(Label, f64)>> {
    inst.validate()?;
    let adj = inst.adjacency();
    if adj.max_degree() > 2 {
        return Err(Error::Parameter("path specialization needs maximum degree 2".into()));
    }
    let nbrs = |l: Label| -> Vec<(Label, f64)> {
        match l {
            Label::Left(i) => adj.left[i].iter().map(|&(j, w, _)| (Label::Right(j), w)).collect(),
            Label::Right(j) => adj.right[j].iter().map(|&(i, w, _)| (Label::Left(i), w)).collect(),
        }
    };
    // (free, taken) of each root child, walking its branch bottom-up
    let branches: Vec<(Label, f64, f64, f64)> = nbrs(root)
        .into_iter()
        .map(|(c, w)| {
            let mut weights = Vec::new(); // weights below c, top-down
            let mut prev = root;
            let mut cur = c;
            for _ in 0..k {
                let next = nbrs(cur).into_iter().find(|&(l, _)| l != prev);
                match next {
                    Some((l, w2)) => {
                        weights.push(w2);
                        prev = cur;
                        cur = l;
                    }
                    None => break,
                }
            }
            // the deepest node sits at depth 1 + weights.len()
            let bottom_frontier = weights.len() == k;
            let (mut free, mut taken) = (if bottom_frontier { 0.0 } else { f64::NEG_INFINITY }, 0.0);
            for &w2 in weights.iter().rev() {
                let f = w2 + taken;
                taken = free;
                free = f;
            }
            (c, w, free, taken)
        })
        .collect();
    Ok(branches
        .iter()
        .map(|&(c, w, _, taken)| {
            let rest: f64 = branches.iter().filter(|b| b.0 != c).map(|b| b.2).sum();
            (c, w + taken + rest)
        })
        .collect())
}
