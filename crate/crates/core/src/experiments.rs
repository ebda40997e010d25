//! Seeded Monte Carlo harness.
//!
//! An experiment samples `trials` instances from a family, computes one
//! observable per instance and writes one CSV row per observable. Trial `k`
//! draws its randomness from `(seed, k)` alone, so trials run in parallel and
//! replay exactly.
//!
//! Config files are flat `key = value` lines; `#` starts a comment.
//!
//! ```text
//! kind = tau_tail          # tau_tail | delta_tail | flow_delta_tail | event_freq | lemma_checks
//! family = uniform_k22     # uniform_k22 | uniform_knn | gadget | smoothed_knn | tiny_flow
//! n = 4
//! phi = 26
//! trials = 100000
//! seed = 1
//! t_max = 10000
//! window = 4
//! t_grid = 100, 200, 400
//! fit = 100, 1000
//! eps = 0.005, 0.01
//! out = tau.csv
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::bp::{BpMatching, RunOptions};
use crate::comptree::{build_tree, light_edge_audit, Label};
use crate::error::{Error, Result};
use crate::generators::{
    check_event_e, check_event_e_phi, derived_seed, sample, sample_event_e, sample_event_e_phi,
    sample_flow, FamilySpec, FlowFamily,
};
use crate::oracles::{
    cheapest_residual_cycle, flow_delta_enumeration, matching_delta, min_cost_flow, mwm,
    ENUMERATION_EDGE_CAP, FLOW_ENUMERATION_CAP,
};

pub const CSV_HEADER: &str = "trial,seed,n,m,phi,family,observable_kind,value,censored,wall_ms";

/// Minimum number of surviving trials for a grid point to enter a tail fit.
pub const FIT_MIN_SURVIVORS: u64 = 50;
/// Minimum number of grid points for a tail fit.
pub const FIT_MIN_POINTS: usize = 5;
/// `R^2` below which a log-log fit is flagged as not a power law.
pub const POWER_LAW_R2: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    TauTail,
    DeltaTail,
    FlowDeltaTail,
    EventFreq,
    LemmaChecks,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::TauTail => "tau_tail",
            Self::DeltaTail => "delta_tail",
            Self::FlowDeltaTail => "flow_delta_tail",
            Self::EventFreq => "event_freq",
            Self::LemmaChecks => "lemma_checks",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "tau_tail" => Self::TauTail,
            "delta_tail" => Self::DeltaTail,
            "flow_delta_tail" => Self::FlowDeltaTail,
            "event_freq" => Self::EventFreq,
            "lemma_checks" => Self::LemmaChecks,
            _ => return Err(Error::Config(format!("unknown experiment kind {s:?}"))),
        })
    }
}

/// Which deterministic statement `lemma_checks` verifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaCheck {
    /// `E_eps` instances: `u1` decodes wrongly at iteration `4k`.
    WrongBelief,
    /// `E^phi_eps` instances: `u1` decodes wrongly at iteration `4k`.
    WrongBeliefPhi,
    /// `SmoothedKnn`: maximum T-matchings contain no light edge.
    NoLightEdges,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Population {
    Bipartite(FamilySpec),
    Flow(FlowFamily),
}

impl Population {
    pub fn label(&self) -> String {
        match self {
            Population::Bipartite(f) => f.label(),
            Population::Flow(f) => f.label(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub population: Population,
    pub trials: u64,
    pub seed: u64,
    pub t_max: usize,
    pub window: usize,
    pub normalized: bool,
    /// Require convergence to the Hungarian optimum in `tau_tail`.
    pub oracle: bool,
    pub t_grid: Vec<usize>,
    pub fit_range: Option<(usize, usize)>,
    pub eps_grid: Vec<f64>,
    pub lemma: Option<LemmaCheck>,
    pub k_max: usize,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, population: Population) -> Self {
        Self {
            kind,
            population,
            trials: 1000,
            seed: 1,
            t_max: 10_000,
            window: 4,
            normalized: true,
            oracle: true,
            t_grid: Vec::new(),
            fit_range: None,
            eps_grid: Vec::new(),
            lemma: None,
            k_max: 1,
            out: None,
        }
    }

    pub fn phi(&self) -> f64 {
        match &self.population {
            Population::Bipartite(f) => f.phi(),
            Population::Flow(_) => 1.0,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: Vec<(usize, String, String)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", k + 1)))?;
            let key = key.trim().to_string();
            if kv.iter().any(|(_, k2, _)| *k2 == key) {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", k + 1)));
            }
            kv.push((k + 1, key, value.trim().to_string()));
        }
        let get = |key: &str| kv.iter().find(|(_, k, _)| k == key).map(|(l, _, v)| (*l, v.as_str()));
        fn num<T: std::str::FromStr>(entry: Option<(usize, &str)>, key: &str) -> Result<Option<T>> {
            entry
                .map(|(l, v)| {
                    v.parse()
                        .map_err(|_| Error::Config(format!("line {l}: cannot parse {key} from {v:?}")))
                })
                .transpose()
        }
        fn list<T: std::str::FromStr>(entry: Option<(usize, &str)>, key: &str) -> Result<Vec<T>> {
            match entry {
                None => Ok(Vec::new()),
                Some((l, v)) => v
                    .split(',')
                    .map(|x| {
                        x.trim().parse().map_err(|_| {
                            Error::Config(format!("line {l}: cannot parse {key} entry {:?}", x.trim()))
                        })
                    })
                    .collect(),
            }
        }
        const KNOWN: &[&str] = &[
            "kind", "family", "n", "phi", "trials", "seed", "t_max", "window", "normalized", "oracle",
            "t_grid", "fit", "eps", "lemma", "k_max", "out", "max_nodes", "max_capacity",
        ];
        for (l, k, _) in &kv {
            if !KNOWN.contains(&k.as_str()) {
                return Err(Error::Config(format!("line {l}: unknown key {k:?}")));
            }
        }

        let kind = ExperimentKind::parse(
            get("kind").ok_or_else(|| Error::Config("missing key \"kind\"".into()))?.1,
        )?;
        let family = get("family").map(|(_, v)| v).unwrap_or("uniform_k22");
        let n: Option<usize> = num(get("n"), "n")?;
        let phi: Option<f64> = num(get("phi"), "phi")?;
        let need_n = || n.ok_or_else(|| Error::Config(format!("family {family} needs n")));
        let population = match family {
            "uniform_k22" => Population::Bipartite(FamilySpec::UniformK22),
            "uniform_knn" => Population::Bipartite(FamilySpec::UniformKnn { n: need_n()? }),
            "gadget" => Population::Bipartite(FamilySpec::GadgetCopies { n: need_n()? }),
            "smoothed_knn" => Population::Bipartite(FamilySpec::SmoothedKnn {
                n: need_n()?,
                phi: phi.ok_or_else(|| Error::Config("smoothed_knn needs phi".into()))?,
            }),
            "tiny_flow" => Population::Flow(FlowFamily::Tiny {
                max_nodes: num(get("max_nodes"), "max_nodes")?.unwrap_or(4),
                max_capacity: num(get("max_capacity"), "max_capacity")?.unwrap_or(2),
            }),
            other => return Err(Error::Config(format!("unknown family {other:?}"))),
        };
        let mut cfg = Self::new(kind, population);
        if let Some(v) = num(get("trials"), "trials")? {
            cfg.trials = v;
        }
        if let Some(v) = num(get("seed"), "seed")? {
            cfg.seed = v;
        }
        if let Some(v) = num(get("t_max"), "t_max")? {
            cfg.t_max = v;
        }
        if let Some(v) = num(get("window"), "window")? {
            cfg.window = v;
        }
        if let Some(v) = num(get("normalized"), "normalized")? {
            cfg.normalized = v;
        }
        if let Some(v) = num(get("oracle"), "oracle")? {
            cfg.oracle = v;
        }
        if let Some(v) = num(get("k_max"), "k_max")? {
            cfg.k_max = v;
        }
        cfg.t_grid = list(get("t_grid"), "t_grid")?;
        cfg.eps_grid = list(get("eps"), "eps")?;
        let fit: Vec<usize> = list(get("fit"), "fit")?;
        cfg.fit_range = match fit.as_slice() {
            [] => None,
            [a, b] => Some((*a, *b)),
            _ => return Err(Error::Config("fit takes two values: lo, hi".into())),
        };
        cfg.lemma = match get("lemma").map(|(_, v)| v) {
            None => None,
            Some("3") => Some(LemmaCheck::WrongBelief),
            Some("5") => Some(LemmaCheck::WrongBeliefPhi),
            Some("6") => Some(LemmaCheck::NoLightEdges),
            Some(other) => return Err(Error::Config(format!("unknown lemma {other:?}, expected 3, 5 or 6"))),
        };
        cfg.out = get("out").map(|(_, v)| PathBuf::from(v));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return cfg_err("trials must be at least 1".into());
        }
        if self.window == 0 || self.t_max == 0 {
            return cfg_err("t_max and window must be at least 1".into());
        }
        if self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return cfg_err("t_grid must be strictly increasing".into());
        }
        if self.eps_grid.windows(2).any(|w| w[0] >= w[1]) || self.eps_grid.iter().any(|&e| e.is_nan() || e <= 0.0) {
            return cfg_err("eps must be positive and strictly increasing".into());
        }
        if let Some(&t) = self.t_grid.last() {
            if t > self.t_max {
                return cfg_err(format!("t_grid point {t} exceeds t_max = {}", self.t_max));
            }
        }
        if let Some((a, b)) = self.fit_range {
            if a >= b {
                return cfg_err("fit range must satisfy lo < hi".into());
            }
        }
        match &self.population {
            Population::Bipartite(f) => f.validate()?,
            Population::Flow(f) => f.validate()?,
        }
        let bip = matches!(self.population, Population::Bipartite(_));
        match self.kind {
            ExperimentKind::TauTail if !bip => return cfg_err("tau_tail needs a bipartite family".into()),
            ExperimentKind::DeltaTail => {
                let Population::Bipartite(f) = &self.population else {
                    return cfg_err("delta_tail needs a bipartite family".into());
                };
                if f.edge_count() > ENUMERATION_EDGE_CAP {
                    return Err(Error::Cap(format!(
                        "delta_tail enumerates matchings; {} has {} > {ENUMERATION_EDGE_CAP} edges",
                        f.label(),
                        f.edge_count()
                    )));
                }
                if self.eps_grid.is_empty() {
                    return cfg_err("delta_tail needs an eps grid".into());
                }
            }
            ExperimentKind::FlowDeltaTail => {
                let Population::Flow(FlowFamily::Tiny { max_nodes, max_capacity }) = self.population else {
                    return cfg_err("flow_delta_tail needs family = tiny_flow".into());
                };
                let worst_edges = (max_nodes * (max_nodes - 1)) as u32;
                let worst = (max_capacity as u128 + 1).saturating_pow(worst_edges);
                if worst > FLOW_ENUMERATION_CAP {
                    return Err(Error::Cap(format!(
                        "tiny flows with {max_nodes} nodes and capacity {max_capacity} can need {worst} > {FLOW_ENUMERATION_CAP} enumeration steps"
                    )));
                }
                if self.eps_grid.is_empty() {
                    return cfg_err("flow_delta_tail needs an eps grid".into());
                }
            }
            ExperimentKind::EventFreq => {
                if self.eps_grid.len() != 1 {
                    return cfg_err("event_freq needs exactly one eps".into());
                }
                match self.population {
                    Population::Bipartite(FamilySpec::UniformK22) => {}
                    Population::Bipartite(FamilySpec::SmoothedKnn { n: 2, .. }) => {}
                    _ => return cfg_err("event_freq needs uniform_k22 or smoothed_knn with n = 2".into()),
                }
            }
            ExperimentKind::LemmaChecks => {
                let lemma = self.lemma.ok_or_else(|| Error::Config("lemma_checks needs lemma".into()))?;
                match (lemma, &self.population) {
                    (LemmaCheck::WrongBelief, Population::Bipartite(FamilySpec::UniformK22))
                    | (LemmaCheck::WrongBeliefPhi, Population::Bipartite(FamilySpec::SmoothedKnn { n: 2, .. }))
                    | (LemmaCheck::NoLightEdges, Population::Bipartite(FamilySpec::SmoothedKnn { .. })) => {}
                    _ => return cfg_err("lemma does not fit the family".into()),
                }
                if lemma != LemmaCheck::NoLightEdges && self.eps_grid.len() != 1 {
                    return cfg_err("lemma 3 and 5 need exactly one eps".into());
                }
            }
            ExperimentKind::TauTail => {}
        }
        Ok(())
    }
}

/// Value column of a record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Count(u64),
    Real(f64),
    /// Observable undefined, e.g. no second-best solution or no residual cycle.
    Absent,
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Count(c) => c as f64,
            Value::Real(x) => x,
            Value::Absent => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub phi: f64,
    pub family: String,
    pub observable: &'static str,
    pub value: Value,
    pub censored: bool,
    pub wall_ms: f64,
}

fn real(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

impl TrialRecord {
    pub fn csv_line(&self) -> String {
        let value = match self.value {
            Value::Count(c) => c.to_string(),
            Value::Real(x) => real(x),
            Value::Absent => "inf".into(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{:.3}",
            self.trial,
            self.seed,
            self.n,
            self.m,
            real(self.phi),
            self.family,
            self.observable,
            value,
            u8::from(self.censored),
            self.wall_ms
        )
    }
}

pub fn write_csv(records: &[TrialRecord], out: &mut impl std::io::Write) -> Result<()> {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn write_csv_file(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv(records, &mut f)?;
    std::io::Write::flush(&mut f)?;
    Ok(())
}

/// Observables of one trial.
pub fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<Vec<TrialRecord>> {
    let start = Instant::now();
    let seed = derived_seed(cfg.seed, trial);
    let label = cfg.population.label();
    let phi = cfg.phi();
    let rec = |n: usize, m: usize, observable: &'static str, value: Value, censored: bool| TrialRecord {
        trial,
        seed,
        n,
        m,
        phi,
        family: label.clone(),
        observable,
        value,
        censored,
        wall_ms: 0.0,
    };
    let mut out = match (&cfg.kind, &cfg.population) {
        (ExperimentKind::TauTail, Population::Bipartite(f)) => {
            let inst = sample(f, cfg.seed, trial)?;
            let mut opts = RunOptions::new(cfg.t_max, cfg.window);
            opts.normalized = cfg.normalized;
            if cfg.oracle {
                opts = opts.with_oracle(&mwm(&inst)?, inst.n_left);
            }
            let r = BpMatching::new(&inst)?.run(&opts);
            let value = Value::Count(r.tau.unwrap_or(cfg.t_max) as u64);
            vec![rec(inst.n_left, inst.edge_count(), "tau", value, !r.converged)]
        }
        (ExperimentKind::DeltaTail, Population::Bipartite(f)) => {
            let inst = sample(f, cfg.seed, trial)?;
            let g = matching_delta(&inst)?;
            let value = if g.delta.is_finite() { Value::Real(g.delta) } else { Value::Absent };
            vec![rec(inst.n_left, inst.edge_count(), "delta", value, false)]
        }
        (ExperimentKind::FlowDeltaTail, Population::Flow(f)) => {
            let net = sample_flow(f, cfg.seed, trial)?;
            let flow = min_cost_flow(&net)?;
            let big = cheapest_residual_cycle(&net, &flow)?;
            let g = flow_delta_enumeration(&net)?;
            let (n, m) = (net.node_count(), net.edge_count());
            vec![
                rec(n, m, "Delta", big.map_or(Value::Absent, Value::Real), false),
                rec(n, m, "delta", if g.delta.is_finite() { Value::Real(g.delta) } else { Value::Absent }, false),
            ]
        }
        (ExperimentKind::EventFreq, Population::Bipartite(f)) => {
            let inst = sample(f, cfg.seed, trial)?;
            let eps = cfg.eps_grid[0];
            let hit = match f {
                FamilySpec::SmoothedKnn { phi, .. } => check_event_e_phi(&inst, eps, *phi)?,
                _ => check_event_e(&inst, eps)?,
            };
            vec![rec(inst.n_left, inst.edge_count(), "event", Value::Count(hit as u64), false)]
        }
        (ExperimentKind::LemmaChecks, Population::Bipartite(f)) => {
            let (inst, violations) = lemma_trial(cfg, f, trial)?;
            vec![rec(inst.n_left, inst.edge_count(), "violations", Value::Count(violations), false)]
        }
        _ => return Err(Error::Config("experiment kind does not fit the family".into())),
    };
    let ms = start.elapsed().as_secs_f64() * 1e3;
    for r in &mut out {
        r.wall_ms = ms;
    }
    Ok(out)
}

/// Iterations `4k` at which the wrong-belief lemmas apply: all `1 <= k <=
/// k_max` with `k <= 1/(c eps) - 1`.
pub fn admissible_k(eps: f64, c: f64, k_max: usize) -> Vec<usize> {
    let bound = 1.0 / (c * eps) - 1.0;
    (1..=k_max).filter(|&k| k as f64 <= bound + 1e-9).collect()
}

fn lemma_trial(
    cfg: &ExperimentConfig,
    family: &FamilySpec,
    trial: u64,
) -> Result<(crate::instance::BipartiteInstance, u64)> {
    match cfg.lemma {
        Some(LemmaCheck::WrongBelief) | Some(LemmaCheck::WrongBeliefPhi) => {
            let eps = cfg.eps_grid[0];
            let (inst, c) = match family {
                FamilySpec::SmoothedKnn { phi, .. } => (sample_event_e_phi(eps, *phi, cfg.seed, trial)?, 52.0),
                _ => (sample_event_e(eps, cfg.seed, trial)?, 8.0),
            };
            let optimum = mwm(&inst)?.left_partners(2)[0];
            let bp = BpMatching::new(&inst)?;
            let ks = admissible_k(eps, c, cfg.k_max);
            let mut state = bp.init_messages(false);
            let mut violations = 0;
            for k in ks {
                while state.t < 4 * k {
                    state = bp.step(&state);
                }
                if bp.decode(&state).assignment[0] == optimum {
                    violations += 1;
                }
            }
            Ok((inst, violations))
        }
        Some(LemmaCheck::NoLightEdges) => {
            let inst = sample(family, cfg.seed, trial)?;
            let mut violations = 0;
            let roots = (0..inst.n_left).map(Label::Left).chain((0..inst.n_right).map(Label::Right));
            for root in roots {
                for k in 0..=cfg.k_max {
                    let tree = build_tree(&inst, root, k)?;
                    let m = tree.max_t_matching(None);
                    if !light_edge_audit(&tree, &inst, &m, family)? {
                        violations += 1;
                    }
                }
            }
            Ok((inst, violations))
        }
        None => Err(Error::Config("lemma_checks needs lemma".into())),
    }
}

/// Runs all trials in parallel; records come back in trial order.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let per_trial: Vec<Vec<TrialRecord>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub grid: Vec<usize>,
    pub survival: Vec<f64>,
    pub stderr: Vec<f64>,
    pub survivors: Vec<u64>,
    pub trials: u64,
    pub censor_rate: f64,
}

/// `P(tau >= t)` on the grid. Censored trials count as surviving every grid
/// point up to `t_max`.
pub fn estimate_survival(records: &[TrialRecord], grid: &[usize], t_max: usize) -> Result<SurvivalCurve> {
    if let Some(&t) = grid.iter().find(|&&t| t > t_max) {
        return Err(Error::Parameter(format!("grid point {t} exceeds t_max = {t_max}")));
    }
    let taus: Vec<&TrialRecord> = records.iter().filter(|r| r.observable == "tau").collect();
    if taus.is_empty() {
        return Err(Error::Parameter("no tau records".into()));
    }
    let n = taus.len() as u64;
    let censored = taus.iter().filter(|r| r.censored).count() as u64;
    let survivors: Vec<u64> = grid
        .iter()
        .map(|&t| {
            taus.iter()
                .filter(|r| r.censored || r.value.as_f64() >= t as f64)
                .count() as u64
        })
        .collect();
    let survival: Vec<f64> = survivors.iter().map(|&s| s as f64 / n as f64).collect();
    let stderr = survival.iter().map(|&p| (p * (1.0 - p) / n as f64).sqrt()).collect();
    Ok(SurvivalCurve {
        grid: grid.to_vec(),
        survival,
        stderr,
        survivors,
        trials: n,
        censor_rate: censored as f64 / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    /// Geometric mean of `P(tau >= t) * t` over the fitted points.
    pub c_hat: f64,
    pub r_squared: f64,
    pub points: usize,
    pub power_law: bool,
    /// `max / min` of `P(tau >= t) * t` over the fitted points.
    pub spread: f64,
}

/// Least-squares fit of `ln P` against `ln t` over grid points in `[lo, hi]`
/// with at least [`FIT_MIN_SURVIVORS`] survivors.
pub fn fit_tail_exponent(curve: &SurvivalCurve, lo: usize, hi: usize) -> Result<TailFit> {
    let pts: Vec<(f64, f64)> = curve
        .grid
        .iter()
        .zip(&curve.survival)
        .zip(&curve.survivors)
        .filter(|((&t, _), &s)| t >= lo && t <= hi && s >= FIT_MIN_SURVIVORS && t > 0)
        .map(|((&t, &p), _)| ((t as f64).ln(), p.ln()))
        .collect();
    if pts.len() < FIT_MIN_POINTS {
        return Err(Error::Parameter(format!(
            "tail fit needs {FIT_MIN_POINTS} grid points with {FIT_MIN_SURVIVORS} survivors in [{lo}, {hi}], found {}",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    let scaled: Vec<f64> = pts.iter().map(|p| p.0 + p.1).collect();
    let c_hat = (scaled.iter().sum::<f64>() / k).exp();
    let spread = (scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - scaled.iter().cloned().fold(f64::INFINITY, f64::min))
    .exp();
    Ok(TailFit {
        slope,
        intercept,
        c_hat,
        r_squared,
        points: pts.len(),
        power_law: r_squared >= POWER_LAW_R2,
        spread,
    })
}

/// Empirical `P(X <= eps)` with its binomial standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct TailPoint {
    pub eps: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub bound: f64,
}

impl TailPoint {
    pub fn within_bound(&self) -> bool {
        self.p_hat <= self.bound + 3.0 * self.stderr
    }
}

/// `P(X <= eps)` for each `eps` against the bound `2 eps phi m`, where `m`
/// is the mean edge count of the records. Absent values count as large.
pub fn isolation_tail(records: &[TrialRecord], observable: &str, eps_grid: &[f64]) -> Vec<TailPoint> {
    let rs: Vec<&TrialRecord> = records.iter().filter(|r| r.observable == observable).collect();
    let n = rs.len().max(1) as f64;
    let m_bar = rs.iter().map(|r| r.m as f64).sum::<f64>() / n;
    let phi = rs.first().map_or(1.0, |r| r.phi);
    eps_grid
        .iter()
        .map(|&eps| {
            let p = rs.iter().filter(|r| r.value.as_f64() <= eps).count() as f64 / n;
            TailPoint {
                eps,
                p_hat: p,
                stderr: (p * (1.0 - p) / n).sqrt(),
                bound: 2.0 * eps * phi * m_bar,
            }
        })
        .collect()
}

/// One pass/fail line of an experiment summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Aggregates records into a report. Only depends on the multiset of
/// records, not on their order.
pub fn summarize(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Result<Summary> {
    let mut text = String::new();
    let mut checks = Vec::new();
    let _ = writeln!(
        text,
        "experiment {} on {}: {} trials, seed {}",
        cfg.kind.name(),
        cfg.population.label(),
        cfg.trials,
        cfg.seed
    );
    match cfg.kind {
        ExperimentKind::TauTail => {
            if cfg.t_grid.is_empty() {
                let taus = records.iter().filter(|r| r.observable == "tau").count();
                let cens = records.iter().filter(|r| r.censored).count();
                let _ = writeln!(text, "{taus} runs, {cens} censored at t_max = {}", cfg.t_max);
            } else {
                let curve = estimate_survival(records, &cfg.t_grid, cfg.t_max)?;
                let _ = writeln!(text, "censor rate {:.6}", curve.censor_rate);
                let _ = writeln!(text, "{:>10} {:>12} {:>12} {:>10} {:>12}", "t", "P(tau>=t)", "stderr", "survivors", "t*P");
                for i in 0..curve.grid.len() {
                    let t = curve.grid[i];
                    let _ = writeln!(
                        text,
                        "{:>10} {:>12.6e} {:>12.3e} {:>10} {:>12.4}",
                        t,
                        curve.survival[i],
                        curve.stderr[i],
                        curve.survivors[i],
                        curve.survival[i] * t as f64
                    );
                }
                if let Some((lo, hi)) = cfg.fit_range {
                    match fit_tail_exponent(&curve, lo, hi) {
                        Ok(fit) => {
                            let _ = writeln!(
                                text,
                                "fit over [{lo}, {hi}]: slope {:.4}, c_hat {:.4}, R^2 {:.4}, spread of t*P {:.3}{}",
                                fit.slope,
                                fit.c_hat,
                                fit.r_squared,
                                fit.spread,
                                if fit.power_law { "" } else { " (not a power law)" }
                            );
                        }
                        Err(e) => {
                            let _ = writeln!(text, "fit over [{lo}, {hi}] skipped: {e}");
                        }
                    }
                }
            }
        }
        ExperimentKind::DeltaTail | ExperimentKind::FlowDeltaTail => {
            let obs = if cfg.kind == ExperimentKind::DeltaTail { "delta" } else { "Delta" };
            for tp in isolation_tail(records, obs, &cfg.eps_grid) {
                let _ = writeln!(
                    text,
                    "P({obs} <= {}) = {:.6} +- {:.6}, bound 2 eps phi m = {:.6}",
                    tp.eps, tp.p_hat, tp.stderr, tp.bound
                );
                checks.push(Check {
                    name: format!("{obs} tail at eps = {}", tp.eps),
                    passed: tp.within_bound(),
                    detail: format!("{:.6} <= {:.6} + 3 * {:.6}", tp.p_hat, tp.bound, tp.stderr),
                });
            }
            if cfg.kind == ExperimentKind::FlowDeltaTail {
                let mut by_trial: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
                for r in records {
                    let slot = by_trial.entry(r.trial).or_insert((f64::NAN, f64::NAN));
                    match r.observable {
                        "Delta" => slot.0 = r.value.as_f64(),
                        "delta" => slot.1 = r.value.as_f64(),
                        _ => {}
                    }
                }
                let mut unique = 0;
                let mut bad = 0;
                for &(big, small) in by_trial.values() {
                    if small.is_finite() && small > 0.0 {
                        unique += 1;
                        if big < small - 1e-9 {
                            bad += 1;
                        }
                    }
                }
                let _ = writeln!(text, "Delta >= delta in {} of {unique} unique-optimum networks", unique - bad);
                checks.push(Check {
                    name: "Delta >= delta".into(),
                    passed: bad == 0,
                    detail: format!("{bad} violations"),
                });
            }
        }
        ExperimentKind::EventFreq => {
            let eps = cfg.eps_grid[0];
            let p = match &cfg.population {
                Population::Bipartite(FamilySpec::SmoothedKnn { phi, .. }) => eps * phi / 4.0,
                _ => eps / 512.0,
            };
            let n = records.len() as f64;
            let hits = records.iter().filter(|r| r.value == Value::Count(1)).count() as f64;
            let sigma = (n * p * (1.0 - p)).sqrt();
            let _ = writeln!(text, "hits {hits} of {n}, expected {:.3} +- {:.3}", n * p, sigma);
            checks.push(Check {
                name: format!("event frequency at eps = {eps}"),
                passed: (hits - n * p).abs() <= 4.0 * sigma,
                detail: format!("|{hits} - {:.3}| <= 4 * {:.3}", n * p, sigma),
            });
        }
        ExperimentKind::LemmaChecks => {
            let v: u64 = records.iter().map(|r| r.value.as_f64() as u64).sum();
            let _ = writeln!(text, "{v} violations in {} instances", records.len());
            checks.push(Check { name: "lemma check".into(), passed: v == 0, detail: format!("{v} violations") });
        }
    }
    for c in &checks {
        let _ = writeln!(text, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(Summary { text, checks })
}

/// Runs the experiment, writes the CSV if configured and returns the records
/// with their summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Vec<TrialRecord>, Summary)> {
    let records = run_trials(cfg)?;
    if let Some(path) = &cfg.out {
        write_csv_file(&records, path)?;
    }
    let summary = summarize(cfg, &records)?;
    Ok((records, summary))
}
