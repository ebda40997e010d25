//! Exact solvers used as ground truth: matchings by enumeration and by the
//! Hungarian method, gaps between best and second-best solutions, min-cost
//! integer flows, residual networks and their cheapest cycle.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::instance::{BipartiteInstance, FlowNetwork, IntegerFlow, Matching};

/// Largest edge count accepted by the enumeration oracles.
pub const ENUMERATION_EDGE_CAP: usize = 24;
/// Largest `prod (u_e + 1)` accepted by [`flow_delta_enumeration`].
pub const FLOW_ENUMERATION_CAP: u128 = 1_000_000;
/// Slack for shortest-path relaxations on real costs.
pub const PATH_TOLERANCE: f64 = 1e-12;

/// Best and second-best solution. `delta` is `+inf` when no second solution
/// exists.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport<S> {
    pub best: S,
    pub second_best: Option<S>,
    pub delta: f64,
    pub unique_flag: bool,
}

fn check_enumerable(inst: &BipartiteInstance) -> Result<()> {
    inst.validate()?;
    if inst.edge_count() > ENUMERATION_EDGE_CAP {
        return Err(Error::Cap(format!(
            "enumeration needs at most {ENUMERATION_EDGE_CAP} edges, instance has {}",
            inst.edge_count()
        )));
    }
    Ok(())
}

/// All matchings including the empty one, heaviest first.
pub fn enumerate_matchings(inst: &BipartiteInstance) -> Result<Vec<Matching>> {
    check_enumerable(inst)?;
    fn go(
        inst: &BipartiteInstance,
        k: usize,
        used_l: &mut [bool],
        used_r: &mut [bool],
        cur: &mut Vec<(usize, usize)>,
        w: f64,
        out: &mut Vec<Matching>,
    ) {
        if k == inst.edges.len() {
            let mut pairs = cur.clone();
            pairs.sort_unstable();
            out.push(Matching { pairs, weight: w });
            return;
        }
        go(inst, k + 1, used_l, used_r, cur, w, out);
        let e = inst.edges[k];
        if !used_l[e.left] && !used_r[e.right] {
            used_l[e.left] = true;
            used_r[e.right] = true;
            cur.push((e.left, e.right));
            go(inst, k + 1, used_l, used_r, cur, w + e.weight, out);
            cur.pop();
            used_l[e.left] = false;
            used_r[e.right] = false;
        }
    }
    let mut out = Vec::new();
    go(
        inst,
        0,
        &mut vec![false; inst.n_left],
        &mut vec![false; inst.n_right],
        &mut Vec::new(),
        0.0,
        &mut out,
    );
    out.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.pairs.cmp(&b.pairs)));
    Ok(out)
}

/// Minimum-cost perfect assignment on an `n x n` cost matrix (row-major),
/// returning the column of every row.
fn hungarian_min(n: usize, cost: &[f64]) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            col[p[j] - 1] = j - 1;
        }
    }
    col
}

/// Maximum-weight matching (not necessarily perfect) by the Hungarian method
/// on the square zero-padded weight matrix. Zero-weight pairs are dropped.
pub fn mwm(inst: &BipartiteInstance) -> Result<Matching> {
    inst.validate()?;
    let n = inst.n_left.max(inst.n_right);
    let mut cost = vec![0.0; n * n];
    for e in &inst.edges {
        cost[e.left * n + e.right] = -e.weight;
    }
    let col = hungarian_min(n, &cost);
    let pairs: Vec<(usize, usize)> = col
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < inst.n_left && j < inst.n_right)
        .filter(|&(i, &j)| inst.weight(i, j).is_some_and(|w| w > 0.0))
        .map(|(i, &j)| (i, j))
        .collect();
    Matching::from_pairs(inst, &pairs)
}

/// Best perfect matching, optionally avoiding one edge. `None` if no perfect
/// matching exists.
fn best_perfect(inst: &BipartiteInstance, avoid: Option<(usize, usize)>) -> Option<Matching> {
    let n = inst.n_left;
    // any cost above n works as a prohibition since weights lie in [0, 1]
    let big = 4.0 * (n as f64 + 1.0);
    let mut cost = vec![big; n * n];
    for e in &inst.edges {
        if Some((e.left, e.right)) != avoid {
            cost[e.left * n + e.right] = -e.weight;
        }
    }
    let col = hungarian_min(n, &cost);
    if col.iter().enumerate().any(|(i, &j)| cost[i * n + j] >= big) {
        return None;
    }
    let pairs: Vec<(usize, usize)> = col.into_iter().enumerate().collect();
    Matching::from_pairs(inst, &pairs).ok()
}

/// Gap between the heaviest and second-heaviest matching, by enumeration.
pub fn matching_delta(inst: &BipartiteInstance) -> Result<GapReport<Matching>> {
    let all = enumerate_matchings(inst)?;
    let mut it = all.into_iter();
    let best = it.next().expect("the empty matching always exists");
    let second_best = it.next();
    let delta = second_best.as_ref().map_or(f64::INFINITY, |s| best.weight - s.weight);
    Ok(GapReport { best, second_best, delta, unique_flag: delta > 0.0 })
}

/// Gap among perfect matchings only: the second-best perfect matching misses
/// at least one edge of the best, so it is the best over the `n` instances
/// with one optimal edge removed.
pub fn perfect_matching_delta(inst: &BipartiteInstance) -> Result<GapReport<Matching>> {
    inst.validate()?;
    if inst.n_left != inst.n_right {
        return Err(Error::Parameter("perfect matchings need n_left = n_right".into()));
    }
    let best = best_perfect(inst, None)
        .ok_or_else(|| Error::Infeasible("instance has no perfect matching".into()))?;
    let second_best = best
        .pairs
        .iter()
        .filter_map(|&e| best_perfect(inst, Some(e)))
        .max_by(|a, b| a.weight.total_cmp(&b.weight));
    let delta = second_best.as_ref().map_or(f64::INFINITY, |s| best.weight - s.weight);
    Ok(GapReport { best, second_best, delta, unique_flag: delta > 0.0 })
}

/// Smallest rate `(w(x*) - w(x)) / |x* - x|_1` over all matchings `x != x*`.
/// `+inf` if the empty matching is the only one.
pub fn sanghavi_c(inst: &BipartiteInstance) -> Result<f64> {
    let all = enumerate_matchings(inst)?;
    let best = &all[0];
    Ok(all[1..]
        .iter()
        .map(|m| (best.weight - m.weight) / best.l1_distance(m) as f64)
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualArc {
    pub from: usize,
    pub to: usize,
    pub capacity: i64,
    pub cost: f64,
    /// Index of the network edge this arc comes from.
    pub edge: usize,
    pub forward: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualNetwork {
    pub node_count: usize,
    pub arcs: Vec<ResidualArc>,
}

/// Residual network: `tail -> head` with capacity `u - f` when `f < u`, and
/// `head -> tail` with capacity `f` and negated cost when `f > 0`.
pub fn residual(net: &FlowNetwork, flow: &IntegerFlow) -> Result<ResidualNetwork> {
    net.validate()?;
    flow.check_feasible(net)?;
    let mut arcs = Vec::new();
    for (k, (e, &f)) in net.edges.iter().zip(&flow.flow).enumerate() {
        if f < e.capacity {
            arcs.push(ResidualArc {
                from: e.tail,
                to: e.head,
                capacity: e.capacity - f,
                cost: e.cost,
                edge: k,
                forward: true,
            });
        }
        if f > 0 {
            arcs.push(ResidualArc { from: e.head, to: e.tail, capacity: f, cost: -e.cost, edge: k, forward: false });
        }
    }
    Ok(ResidualNetwork { node_count: net.node_count(), arcs })
}

/// Bellman-Ford from every node at once. Returns potentials, or the cost of
/// a negative cycle.
fn potentials(res: &ResidualNetwork) -> std::result::Result<Vec<f64>, f64> {
    let n = res.node_count;
    let mut d = vec![0.0; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut last = None;
    for _ in 0..=n {
        last = None;
        for (a, arc) in res.arcs.iter().enumerate() {
            if d[arc.from] + arc.cost < d[arc.to] - PATH_TOLERANCE {
                d[arc.to] = d[arc.from] + arc.cost;
                pred[arc.to] = Some(a);
                last = Some(arc.to);
            }
        }
        if last.is_none() {
            return Ok(d);
        }
    }
    // walk back n steps to land on the cycle, then sum it
    let mut v = last.expect("relaxation happened");
    for _ in 0..n {
        v = res.arcs[pred[v].expect("relaxed node has a predecessor")].from;
    }
    let start = v;
    let mut cost = 0.0;
    loop {
        let arc = res.arcs[pred[v].expect("cycle node has a predecessor")];
        cost += arc.cost;
        v = arc.from;
        if v == start {
            break;
        }
    }
    Err(cost)
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Cost of the cheapest directed cycle in the residual network of `flow`,
/// `None` if the residual network is acyclic.
///
/// The forward and backward arc of one edge form a cycle of cost 0 that
/// changes nothing, so it does not count: the cycle closed by arc `x -> y`
/// is completed by a shortest `y -> x` path that avoids the other arc of the
/// same edge.
pub fn cheapest_residual_cycle(net: &FlowNetwork, flow: &IntegerFlow) -> Result<Option<f64>> {
    let res = residual(net, flow)?;
    let pot = potentials(&res).map_err(Error::NotOptimal)?;
    let n = res.node_count;
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, arc) in res.arcs.iter().enumerate() {
        out[arc.from].push(a);
    }
    let reduced = |arc: &ResidualArc| (arc.cost + pot[arc.from] - pot[arc.to]).max(0.0);

    let mut best: Option<f64> = None;
    let mut dist = vec![f64::INFINITY; n];
    let mut true_cost = vec![0.0; n];
    for closing in &res.arcs {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        let (src, dst) = (closing.to, closing.from);
        dist[src] = 0.0;
        true_cost[src] = 0.0;
        let mut heap = BinaryHeap::from([HeapItem(0.0, src)]);
        while let Some(HeapItem(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            if v == dst {
                break;
            }
            for &b in &out[v] {
                if res.arcs[b].edge == closing.edge {
                    continue;
                }
                let arc = &res.arcs[b];
                let nd = d + reduced(arc);
                if nd < dist[arc.to] {
                    dist[arc.to] = nd;
                    true_cost[arc.to] = true_cost[v] + arc.cost;
                    heap.push(HeapItem(nd, arc.to));
                }
            }
        }
        if dist[dst].is_finite() {
            let c = closing.cost + true_cost[dst];
            best = Some(best.map_or(c, |b: f64| b.min(c)));
        }
    }
    Ok(best)
}

/// Min-cost integer flow by successive shortest paths from a super source to
/// a super sink, with Bellman-Ford on the residual costs.
pub fn min_cost_flow(net: &FlowNetwork) -> Result<IntegerFlow> {
    net.validate()?;
    let n = net.node_count();
    let (s, t) = (n, n + 1);
    // arc lists: (to, capacity, cost, reverse arc index)
    struct Arc {
        to: usize,
        cap: i64,
        cost: f64,
        rev: usize,
    }
    let mut g: Vec<Vec<Arc>> = (0..n + 2).map(|_| Vec::new()).collect();
    let add = |g: &mut Vec<Vec<Arc>>, a: usize, b: usize, cap: i64, cost: f64| {
        let ra = g[b].len();
        let rb = g[a].len();
        g[a].push(Arc { to: b, cap, cost, rev: ra });
        g[b].push(Arc { to: a, cap: 0, cost: -cost, rev: rb });
        (a, rb)
    };
    let handles: Vec<(usize, usize)> = net
        .edges
        .iter()
        .map(|e| add(&mut g, e.tail, e.head, e.capacity, e.cost))
        .collect();
    let mut supply = 0i64;
    for (v, &b) in net.budgets.iter().enumerate() {
        if b > 0 {
            add(&mut g, s, v, b, 0.0);
            supply += b;
        } else if b < 0 {
            add(&mut g, v, t, -b, 0.0);
        }
    }

    let mut sent = 0i64;
    while sent < supply {
        let mut dist = vec![f64::INFINITY; n + 2];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; n + 2];
        dist[s] = 0.0;
        for _ in 0..n + 2 {
            let mut changed = false;
            for v in 0..n + 2 {
                if dist[v] == f64::INFINITY {
                    continue;
                }
                for (k, arc) in g[v].iter().enumerate() {
                    if arc.cap > 0 && dist[v] + arc.cost < dist[arc.to] - PATH_TOLERANCE {
                        dist[arc.to] = dist[v] + arc.cost;
                        prev[arc.to] = Some((v, k));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[t] == f64::INFINITY {
            return Err(Error::Infeasible(format!(
                "only {sent} of {supply} units of supply can be routed"
            )));
        }
        let mut push = supply - sent;
        let mut v = t;
        while let Some((u, k)) = prev[v] {
            push = push.min(g[u][k].cap);
            v = u;
        }
        let mut v = t;
        while let Some((u, k)) = prev[v] {
            g[u][k].cap -= push;
            let (to, rev) = (g[u][k].to, g[u][k].rev);
            g[to][rev].cap += push;
            v = u;
        }
        sent += push;
    }
    let flow = handles
        .iter()
        .zip(&net.edges)
        .map(|(&(a, k), e)| e.capacity - g[a][k].cap)
        .collect();
    let flow = IntegerFlow { flow };
    flow.check_feasible(net)?;
    Ok(flow)
}

/// Best and second-best feasible integer flows by exhaustive search.
pub fn flow_delta_enumeration(net: &FlowNetwork) -> Result<GapReport<IntegerFlow>> {
    net.validate()?;
    let size = net
        .edges
        .iter()
        .fold(1u128, |acc, e| acc.saturating_mul(e.capacity as u128 + 1));
    if size > FLOW_ENUMERATION_CAP {
        return Err(Error::Cap(format!(
            "flow enumeration space {size} exceeds {FLOW_ENUMERATION_CAP}"
        )));
    }
    let n = net.node_count();
    let m = net.edge_count();
    // rem_out[k][v] / rem_in[k][v]: capacity leaving / entering v on edges k..
    let mut rem_out = vec![vec![0i64; n]; m + 1];
    let mut rem_in = vec![vec![0i64; n]; m + 1];
    for k in (0..m).rev() {
        rem_out[k] = rem_out[k + 1].clone();
        rem_in[k] = rem_in[k + 1].clone();
        rem_out[k][net.edges[k].tail] += net.edges[k].capacity;
        rem_in[k][net.edges[k].head] += net.edges[k].capacity;
    }
    struct Search<'a> {
        net: &'a FlowNetwork,
        rem_out: Vec<Vec<i64>>,
        rem_in: Vec<Vec<i64>>,
        flow: Vec<i64>,
        bal: Vec<i64>,
        // two cheapest flows so far, ordered by (cost, flow)
        top: Vec<(f64, Vec<i64>)>,
    }
    impl Search<'_> {
        fn ok(&self, k: usize, v: usize) -> bool {
            let need = self.net.budgets[v] - self.bal[v];
            -self.rem_in[k][v] <= need && need <= self.rem_out[k][v]
        }
        fn go(&mut self, k: usize) {
            if k == self.flow.len() {
                let cost = IntegerFlow { flow: self.flow.clone() }.cost(self.net);
                self.top.push((cost, self.flow.clone()));
                self.top.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
                self.top.truncate(2);
                return;
            }
            let e = self.net.edges[k];
            for f in 0..=e.capacity {
                self.flow[k] = f;
                self.bal[e.tail] += f;
                self.bal[e.head] -= f;
                if self.ok(k + 1, e.tail) && self.ok(k + 1, e.head) {
                    self.go(k + 1);
                }
                self.bal[e.tail] -= f;
                self.bal[e.head] += f;
            }
            self.flow[k] = 0;
        }
    }
    let mut search = Search { net, rem_out, rem_in, flow: vec![0; m], bal: vec![0; n], top: Vec::new() };
    if !(0..n).all(|v| search.ok(0, v)) {
        return Err(Error::Infeasible("no feasible integer flow".into()));
    }
    search.go(0);
    let mut it = search.top.into_iter();
    let (best_cost, best) = it
        .next()
        .ok_or_else(|| Error::Infeasible("no feasible integer flow".into()))?;
    let second = it.next();
    let delta = second.as_ref().map_or(f64::INFINITY, |(c, _)| c - best_cost);
    Ok(GapReport {
        best: IntegerFlow { flow: best },
        second_best: second.map(|(_, f)| IntegerFlow { flow: f }),
        delta,
        unique_flag: delta > 0.0,
    })
}
