//! Seeded samplers for the random instance families, plus membership tests for
//! the near-tie events on `K_{2,2}` that drive slow convergence.
//!
//! Every sampler is a pure function of `(seed, trial_index)`. The pair is
//! mixed into a per-trial seed for a ChaCha8 stream, and each edge consumes
//! exactly one 64-bit word in edge order, so edge `k` of trial `t` depends on
//! `(seed, t, k)` only.
//!
//! Interval conventions: `[a, b]` and `[a, b)` are sampled as `a + (b - a) u`
//! with `u` in `[0, 1)`; `(a, b]` uses `u` in `(0, 1]`.

use rand::distributions::{Distribution, OpenClosed01, Standard};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{BipartiteInstance, Edge, FlowEdge, FlowNetwork};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the generator stream for one trial.
pub fn derived_seed(seed: u64, trial_index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(trial_index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derived_seed(seed, trial_index))
}

fn unit_closed_open(rng: &mut impl Rng) -> f64 {
    Standard.sample(rng)
}

fn unit_open_closed(rng: &mut impl Rng) -> f64 {
    OpenClosed01.sample(rng)
}

/// One constant-density piece on `[lo, hi)` (or `(lo, hi]` when `open_low`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
    pub open_low: bool,
}

impl Piece {
    pub fn new(lo: f64, hi: f64, density: f64) -> Self {
        Self { lo, hi, density, open_low: false }
    }

    pub fn open_low(lo: f64, hi: f64, density: f64) -> Self {
        Self { lo, hi, density, open_low: true }
    }

    fn mass(&self) -> f64 {
        (self.hi - self.lo) * self.density
    }
}

/// Piecewise-constant density on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySpec {
    pub pieces: Vec<Piece>,
}

impl DensitySpec {
    pub fn new(pieces: Vec<Piece>) -> Self {
        Self { pieces }
    }

    /// Uniform density on `[lo, hi)`.
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self::new(vec![Piece::new(lo, hi, 1.0 / (hi - lo))])
    }

    /// Uniform density on `(lo, hi]`.
    pub fn uniform_open_low(lo: f64, hi: f64) -> Self {
        Self::new(vec![Piece::open_low(lo, hi, 1.0 / (hi - lo))])
    }

    pub fn max_density(&self) -> f64 {
        self.pieces.iter().map(|p| p.density).fold(0.0, f64::max)
    }

    /// Checks support, disjointness, unit mass (to 1e-12) and the bound `phi`.
    pub fn validate(&self, phi: f64) -> Result<()> {
        if self.pieces.is_empty() {
            return Err(Error::Parameter("density has no pieces".into()));
        }
        let mut sorted: Vec<&Piece> = self.pieces.iter().collect();
        sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for p in &sorted {
            if !(0.0 <= p.lo && p.lo < p.hi && p.hi <= 1.0) {
                return Err(Error::Parameter(format!(
                    "piece [{}, {}) is not a non-empty subinterval of [0, 1]",
                    p.lo, p.hi
                )));
            }
            if !(p.density >= 0.0 && p.density.is_finite()) {
                return Err(Error::Parameter(format!("piece density {} is invalid", p.density)));
            }
            if p.density > phi * (1.0 + 1e-12) {
                return Err(Error::Parameter(format!(
                    "density {} exceeds the declared bound phi = {}",
                    p.density, phi
                )));
            }
        }
        for w in sorted.windows(2) {
            if w[1].lo < w[0].hi {
                return Err(Error::Parameter(format!(
                    "pieces [{}, {}) and [{}, {}) overlap",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                )));
            }
        }
        let mass: f64 = self.pieces.iter().map(Piece::mass).sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("total mass is {mass}, expected 1")));
        }
        Ok(())
    }

    /// Inverse-CDF draw. Consumes exactly one word from `rng`.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let bits: u64 = rng.gen();
        // top 53 bits, as rand's Standard does
        let u = (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let total: f64 = self.pieces.iter().map(Piece::mass).sum();
        let mut target = u * total;
        let last = self.pieces.iter().rposition(|p| p.density > 0.0).unwrap_or(0);
        for (k, p) in self.pieces.iter().enumerate() {
            let m = p.mass();
            if m <= 0.0 {
                continue;
            }
            if target < m || k == last {
                let frac = (target / m).clamp(0.0, 1.0);
                let x = if p.open_low {
                    // map [0,1) onto (lo, hi]
                    p.hi - (p.hi - p.lo) * frac
                } else {
                    p.lo + (p.hi - p.lo) * frac
                };
                return x.min(p.hi);
            }
            target -= m;
        }
        unreachable!("density has positive mass")
    }
}

/// The four heavy-edge densities of one smoothed `K_{2,2}` block, indexed by
/// `(p, q)` in `{0, 1}^2`:
/// `w11 ~ U[1-1/phi, 1]`, `w12, w21 ~ U(23/26, 23/26+1/phi]`,
/// `w22 ~ U[20/26-1/phi, 20/26+3/phi]` (density `phi/4`).
pub fn smoothed_block_density(p: usize, q: usize, phi: f64) -> DensitySpec {
    let base = 23.0 / 26.0;
    match (p, q) {
        (0, 0) => DensitySpec::uniform(1.0 - 1.0 / phi, 1.0),
        (0, 1) | (1, 0) => DensitySpec::uniform_open_low(base, base + 1.0 / phi),
        (1, 1) => DensitySpec::uniform(20.0 / 26.0 - 1.0 / phi, 20.0 / 26.0 + 3.0 / phi),
        _ => panic!("block index ({p}, {q}) outside {{0,1}}^2"),
    }
}

/// Densities on `K_{2,2}` under which `E^phi_eps` has probability exactly
/// `eps * phi / 4`. Row-major order `w11, w12, w21, w22`.
pub fn event_phi_densities(phi: f64) -> [DensitySpec; 4] {
    [
        smoothed_block_density(0, 0, phi),
        smoothed_block_density(0, 1, phi),
        smoothed_block_density(1, 0, phi),
        smoothed_block_density(1, 1, phi),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomEdge {
    pub left: usize,
    pub right: usize,
    pub density: DensitySpec,
}

/// Random bipartite instance families.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    /// `K_{2,2}` with iid `U[0,1]` weights.
    UniformK22,
    /// `K_{n,n}` with iid `U[0,1]` weights.
    UniformKnn { n: usize },
    /// `n / 4` disjoint `K_{2,2}` copies (`n` nodes in total), iid `U[0,1]`,
    /// no edges between copies.
    GadgetCopies { n: usize },
    /// `K_{n,n}` split into `n / 2` blocks: heavy intra-block edges drawn from
    /// [`smoothed_block_density`], light cross-block edges `U[0, 1/phi]`.
    SmoothedKnn { n: usize, phi: f64 },
    /// Arbitrary graph with one density per edge, all bounded by `phi`.
    Custom { n_left: usize, n_right: usize, phi: f64, edges: Vec<CustomEdge> },
}

impl FamilySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            FamilySpec::UniformK22 => Ok(()),
            FamilySpec::UniformKnn { n } => {
                if *n == 0 {
                    return Err(Error::Parameter("UniformKnn needs n >= 1".into()));
                }
                Ok(())
            }
            FamilySpec::GadgetCopies { n } => {
                if *n == 0 || n % 4 != 0 {
                    return Err(Error::Parameter(format!(
                        "GadgetCopies needs a positive multiple of 4 nodes, got {n}"
                    )));
                }
                Ok(())
            }
            FamilySpec::SmoothedKnn { n, phi } => {
                if *phi < 26.0 || *n < 2 || n % 2 != 0 {
                    return Err(Error::Parameter(format!(
                        "SmoothedKnn needs phi >= 26 and n >= 2 even, got n = {n}, phi = {phi}"
                    )));
                }
                Ok(())
            }
            FamilySpec::Custom { n_left, n_right, phi, edges } => {
                let mut seen = std::collections::HashSet::new();
                for e in edges {
                    if e.left >= *n_left || e.right >= *n_right {
                        return Err(Error::Parameter(format!(
                            "custom edge ({}, {}) out of range",
                            e.left + 1,
                            e.right + 1
                        )));
                    }
                    if !seen.insert((e.left, e.right)) {
                        return Err(Error::Parameter(format!(
                            "custom edge ({}, {}) given twice",
                            e.left + 1,
                            e.right + 1
                        )));
                    }
                    e.density.validate(*phi)?;
                }
                Ok(())
            }
        }
    }

    /// Maximum density of any edge weight.
    pub fn phi(&self) -> f64 {
        match self {
            FamilySpec::SmoothedKnn { phi, .. } | FamilySpec::Custom { phi, .. } => *phi,
            _ => 1.0,
        }
    }

    pub fn n_left(&self) -> usize {
        match self {
            FamilySpec::UniformK22 => 2,
            FamilySpec::UniformKnn { n } | FamilySpec::SmoothedKnn { n, .. } => *n,
            FamilySpec::GadgetCopies { n } => n / 2,
            FamilySpec::Custom { n_left, .. } => *n_left,
        }
    }

    pub fn edge_count(&self) -> usize {
        match self {
            FamilySpec::UniformK22 => 4,
            FamilySpec::UniformKnn { n } | FamilySpec::SmoothedKnn { n, .. } => n * n,
            FamilySpec::GadgetCopies { n } => *n,
            FamilySpec::Custom { edges, .. } => edges.len(),
        }
    }

    /// Short label used in CSV output.
    pub fn label(&self) -> String {
        match self {
            FamilySpec::UniformK22 => "uniform_k22".into(),
            FamilySpec::UniformKnn { n } => format!("uniform_knn:{n}"),
            FamilySpec::GadgetCopies { n } => format!("gadget:{n}"),
            FamilySpec::SmoothedKnn { n, phi } => format!("smoothed:{n}:{phi}"),
            FamilySpec::Custom { n_left, n_right, .. } => format!("custom:{n_left}x{n_right}"),
        }
    }

    /// Whether edge `(i, j)` of a [`FamilySpec::SmoothedKnn`] sample lies
    /// inside one block.
    pub fn is_heavy(&self, i: usize, j: usize) -> Result<bool> {
        match self {
            FamilySpec::SmoothedKnn { .. } => Ok(i / 2 == j / 2),
            other => Err(Error::Parameter(format!(
                "heavy/light classification is only defined for SmoothedKnn, not {}",
                other.label()
            ))),
        }
    }
}

fn uniform_complete(n: usize, rng: &mut impl Rng) -> BipartiteInstance {
    let edges = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| Edge::new(i, j, unit_closed_open(rng)))
        .collect();
    BipartiteInstance { n_left: n, n_right: n, edges }
}

/// Draws one instance of `family` for trial `trial_index`.
pub fn sample(family: &FamilySpec, seed: u64, trial_index: u64) -> Result<BipartiteInstance> {
    family.validate()?;
    let mut rng = trial_rng(seed, trial_index);
    let inst = match family {
        FamilySpec::UniformK22 => uniform_complete(2, &mut rng),
        FamilySpec::UniformKnn { n } => uniform_complete(*n, &mut rng),
        FamilySpec::GadgetCopies { n } => {
            let copies = n / 4;
            let mut edges = Vec::with_capacity(4 * copies);
            for c in 0..copies {
                for p in 0..2 {
                    for q in 0..2 {
                        edges.push(Edge::new(2 * c + p, 2 * c + q, unit_closed_open(&mut rng)));
                    }
                }
            }
            BipartiteInstance { n_left: 2 * copies, n_right: 2 * copies, edges }
        }
        FamilySpec::SmoothedKnn { n, phi } => {
            let light = DensitySpec::uniform(0.0, 1.0 / phi);
            let mut edges = Vec::with_capacity(n * n);
            for i in 0..*n {
                for j in 0..*n {
                    let w = if i / 2 == j / 2 {
                        smoothed_block_density(i % 2, j % 2, *phi).sample(&mut rng)
                    } else {
                        light.sample(&mut rng)
                    };
                    edges.push(Edge::new(i, j, w));
                }
            }
            BipartiteInstance { n_left: *n, n_right: *n, edges }
        }
        FamilySpec::Custom { n_left, n_right, edges, .. } => BipartiteInstance {
            n_left: *n_left,
            n_right: *n_right,
            edges: edges
                .iter()
                .map(|e| Edge::new(e.left, e.right, e.density.sample(&mut rng)))
                .collect(),
        },
    };
    debug_assert!(inst.validate().is_ok());
    Ok(inst)
}

/// Draws each listed edge independently from its own density.
pub fn sample_custom(
    n_left: usize,
    n_right: usize,
    phi: f64,
    edges: &[CustomEdge],
    seed: u64,
    trial_index: u64,
) -> Result<BipartiteInstance> {
    let family = FamilySpec::Custom { n_left, n_right, phi, edges: edges.to_vec() };
    sample(&family, seed, trial_index)
}

fn k22_weights(inst: &BipartiteInstance) -> Result<[f64; 4]> {
    if inst.n_left != 2 || inst.n_right != 2 || !inst.is_complete() {
        return Err(Error::Parameter("event checks need a complete 2x2 instance".into()));
    }
    let m = inst.weight_matrix();
    Ok([m[0].unwrap(), m[1].unwrap(), m[2].unwrap(), m[3].unwrap()])
}

/// Event `E_eps` on `K_{2,2}`: `w11 in [7/8, 1]`, `w12 in (1/2, 5/8]`,
/// `w21 in (5/8, 3/4]` and `w22 in [s - eps, s)` with `s = w12 + w21 - w11`.
pub fn check_event_e(inst: &BipartiteInstance, eps: f64) -> Result<bool> {
    if !(eps > 0.0 && eps <= 0.125) {
        return Err(Error::Parameter(format!("eps must lie in (0, 1/8], got {eps}")));
    }
    let [w11, w12, w21, w22] = k22_weights(inst)?;
    let s = w12 + w21 - w11;
    Ok((0.875..=1.0).contains(&w11)
        && w12 > 0.5
        && w12 <= 0.625
        && w21 > 0.625
        && w21 <= 0.75
        && w22 >= s - eps
        && w22 < s)
}

/// Event `E^phi_eps` on `K_{2,2}`: `w11 in [1 - 1/phi, 1]`,
/// `w12, w21 in (23/26, 23/26 + 1/phi]` and `w22 in [s - eps, s)`.
pub fn check_event_e_phi(inst: &BipartiteInstance, eps: f64, phi: f64) -> Result<bool> {
    if phi < 26.0 {
        return Err(Error::Parameter(format!("phi must be at least 26, got {phi}")));
    }
    if !(eps > 0.0 && eps <= 1.0 / phi) {
        return Err(Error::Parameter(format!("eps must lie in (0, 1/phi], got {eps}")));
    }
    let [w11, w12, w21, w22] = k22_weights(inst)?;
    let base = 23.0 / 26.0;
    let top = base + 1.0 / phi;
    let s = w12 + w21 - w11;
    Ok(w11 >= 1.0 - 1.0 / phi
        && w11 <= 1.0
        && w12 > base
        && w12 <= top
        && w21 > base
        && w21 <= top
        && w22 >= s - eps
        && w22 < s)
}

/// Draws a `K_{2,2}` instance conditioned on `E_eps` by sampling each weight
/// uniformly from its event interval.
pub fn sample_event_e(eps: f64, seed: u64, trial_index: u64) -> Result<BipartiteInstance> {
    if !(eps > 0.0 && eps <= 0.125) {
        return Err(Error::Parameter(format!("eps must lie in (0, 1/8], got {eps}")));
    }
    let mut rng = trial_rng(seed, trial_index);
    let w11 = 0.875 + 0.125 * unit_closed_open(&mut rng);
    let w12 = 0.5 + 0.125 * unit_open_closed(&mut rng);
    let w21 = 0.625 + 0.125 * unit_open_closed(&mut rng);
    let s = w12 + w21 - w11;
    let w22 = (s - eps) + eps * unit_closed_open(&mut rng);
    BipartiteInstance::from_matrix(2, 2, &[w11, w12, w21, w22.min(s.next_down())])
}

/// Draws a `K_{2,2}` instance conditioned on `E^phi_eps`.
pub fn sample_event_e_phi(eps: f64, phi: f64, seed: u64, trial_index: u64) -> Result<BipartiteInstance> {
    if phi < 26.0 || !(eps > 0.0 && eps <= 1.0 / phi) {
        return Err(Error::Parameter(format!(
            "need phi >= 26 and eps in (0, 1/phi], got phi = {phi}, eps = {eps}"
        )));
    }
    let mut rng = trial_rng(seed, trial_index);
    let base = 23.0 / 26.0;
    let w11 = (1.0 - 1.0 / phi) + (1.0 / phi) * unit_closed_open(&mut rng);
    let w12 = base + (1.0 / phi) * unit_open_closed(&mut rng);
    let w21 = base + (1.0 / phi) * unit_open_closed(&mut rng);
    let s = w12 + w21 - w11;
    let w22 = (s - eps) + eps * unit_closed_open(&mut rng);
    BipartiteInstance::from_matrix(2, 2, &[w11, w12, w21, w22.min(s.next_down())])
}

/// Random small flow networks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowFamily {
    /// Between 2 and `max_nodes` nodes; each ordered pair is an edge with
    /// probability 1/2; capacities uniform in `1..=max_capacity`; costs
    /// `U[0,1]`. Budgets come from a random integer flow, so every sample is
    /// feasible.
    Tiny { max_nodes: usize, max_capacity: i64 },
}

impl FlowFamily {
    pub fn validate(&self) -> Result<()> {
        let FlowFamily::Tiny { max_nodes, max_capacity } = *self;
        if max_nodes < 2 || max_capacity < 1 {
            return Err(Error::Parameter("tiny flow family needs max_nodes >= 2 and max_capacity >= 1".into()));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let FlowFamily::Tiny { max_nodes, max_capacity } = *self;
        format!("tiny_flow:{max_nodes}:{max_capacity}")
    }
}

pub fn sample_flow(family: &FlowFamily, seed: u64, trial_index: u64) -> Result<FlowNetwork> {
    family.validate()?;
    let FlowFamily::Tiny { max_nodes, max_capacity } = *family;
    let mut rng = trial_rng(seed, trial_index);
    let n = rng.gen_range(2..=max_nodes);
    let mut arcs = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(0.5) {
                arcs.push((a, b));
            }
        }
    }
    if arcs.is_empty() {
        arcs.push((0, 1));
    }
    let mut budgets = vec![0i64; n];
    let mut edges = Vec::with_capacity(arcs.len());
    for (a, b) in arcs {
        let cap = rng.gen_range(1..=max_capacity);
        let f = rng.gen_range(0..=cap);
        budgets[a] += f;
        budgets[b] -= f;
        edges.push(FlowEdge::new(a, b, cap, 0.0));
    }
    // costs last, so the graph is fixed before any cost is drawn
    for e in &mut edges {
        e.cost = unit_closed_open(&mut rng);
    }
    FlowNetwork::new(budgets, edges)
}
