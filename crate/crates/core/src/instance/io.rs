//! Plain-text edge-list format.
//!
//! ```text
//! # comment
//! bip <n_left> <n_right>
//! <i> <j> <w>            one line per edge, 1-based indices
//!
//! flow <n> <m>
//! node <v> <b_v>         nodes without a line have budget 0
//! <i> <j> <u> <c>        m edge lines: tail, head, capacity, cost
//! ```
//!
//! Reals are written with Rust's shortest round-trip formatting, so
//! `read_instance(&write_instance(x))` reproduces `x` bit for bit.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{BipartiteInstance, Edge, FlowEdge, FlowNetwork, Instance};
use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn field<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from {tok:?}")))
}

fn index(tok: Option<&str>, line: usize, what: &str, bound: usize) -> Result<usize> {
    let v: usize = field(tok, line, what)?;
    if v == 0 || v > bound {
        return Err(parse_err(line, format!("{what} {v} outside 1..={bound}")));
    }
    Ok(v - 1)
}

fn no_trailing<'a>(mut toks: impl Iterator<Item = &'a str>, line: usize) -> Result<()> {
    match toks.next() {
        Some(t) => Err(parse_err(line, format!("unexpected trailing token {t:?}"))),
        None => Ok(()),
    }
}

/// Parses an instance file. Invariant violations surface as validation
/// errors after parsing succeeds.
pub fn read_instance(text: &str) -> Result<Instance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header line"))?;
    let mut toks = header.split_whitespace();
    match toks.next() {
        Some("bip") => {
            let n_left: usize = field(toks.next(), hline, "n_left")?;
            let n_right: usize = field(toks.next(), hline, "n_right")?;
            no_trailing(toks, hline)?;
            let mut edges = Vec::new();
            for (ln, l) in lines {
                let mut t = l.split_whitespace();
                let i = index(t.next(), ln, "left index", n_left)?;
                let j = index(t.next(), ln, "right index", n_right)?;
                let w: f64 = field(t.next(), ln, "weight")?;
                no_trailing(t, ln)?;
                edges.push(Edge::new(i, j, w));
            }
            Ok(Instance::Bipartite(BipartiteInstance::new(n_left, n_right, edges)?))
        }
        Some("flow") => {
            let n: usize = field(toks.next(), hline, "node count")?;
            let m: usize = field(toks.next(), hline, "edge count")?;
            no_trailing(toks, hline)?;
            let mut budgets = vec![0i64; n];
            let mut budget_set = vec![false; n];
            let mut edges = Vec::with_capacity(m);
            for (ln, l) in lines {
                let mut t = l.split_whitespace();
                if l.starts_with("node") {
                    t.next();
                    if !edges.is_empty() {
                        return Err(parse_err(ln, "node lines must precede edge lines"));
                    }
                    let v = index(t.next(), ln, "node", n)?;
                    let b: i64 = field(t.next(), ln, "budget")?;
                    no_trailing(t, ln)?;
                    if std::mem::replace(&mut budget_set[v], true) {
                        return Err(parse_err(ln, format!("budget of node {} given twice", v + 1)));
                    }
                    budgets[v] = b;
                } else {
                    let i = index(t.next(), ln, "tail", n)?;
                    let j = index(t.next(), ln, "head", n)?;
                    let u: i64 = field(t.next(), ln, "capacity")?;
                    let c: f64 = field(t.next(), ln, "cost")?;
                    no_trailing(t, ln)?;
                    edges.push(FlowEdge::new(i, j, u, c));
                }
            }
            if edges.len() != m {
                return Err(parse_err(hline, format!("header declares {m} edges, found {}", edges.len())));
            }
            Ok(Instance::Flow(FlowNetwork::new(budgets, edges)?))
        }
        Some(other) => Err(parse_err(hline, format!("unknown instance kind {other:?}"))),
        None => Err(parse_err(hline, "empty header")),
    }
}

pub fn write_instance(inst: &Instance) -> String {
    match inst {
        Instance::Bipartite(b) => write_bipartite(b),
        Instance::Flow(f) => write_flow(f),
    }
}

pub fn write_bipartite(inst: &BipartiteInstance) -> String {
    let mut s = format!("bip {} {}\n", inst.n_left, inst.n_right);
    for e in &inst.edges {
        let _ = writeln!(s, "{} {} {}", e.left + 1, e.right + 1, e.weight);
    }
    s
}

pub fn write_flow(net: &FlowNetwork) -> String {
    let mut s = format!("flow {} {}\n", net.budgets.len(), net.edges.len());
    for (v, b) in net.budgets.iter().enumerate() {
        let _ = writeln!(s, "node {} {}", v + 1, b);
    }
    for e in &net.edges {
        let _ = writeln!(s, "{} {} {} {}", e.tail + 1, e.head + 1, e.capacity, e.cost);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_k22() {
        let text = "# K22\nbip 2 2\n1 1 0.9\n1 2 0.6\n2 1 0.7\n2 2 0.35\n";
        let Instance::Bipartite(inst) = read_instance(text).unwrap() else {
            panic!("expected bipartite")
        };
        assert_eq!(inst, BipartiteInstance::from_matrix(2, 2, &[0.9, 0.6, 0.7, 0.35]).unwrap());
    }

    #[test]
    fn empty_edge_section() {
        let Instance::Bipartite(inst) = read_instance("bip 3 2\n").unwrap() else { panic!() };
        assert_eq!(inst.edge_count(), 0);
        assert_eq!((inst.n_left, inst.n_right), (3, 2));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = read_instance("bip 2 2\n1 1 0.5\n\n1 x 0.5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = read_instance("bip 2 2\n3 1 0.5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn invariant_violation_is_a_validation_error() {
        let err = read_instance("bip 1 1\n1 1 1.5\n").unwrap_err();
        assert!(matches!(err, Error::Invalid(_)), "{err}");
        let err = read_instance("flow 2 1\nnode 1 1\nnode 2 1\n1 2 1 0.5\n").unwrap_err();
        assert!(err.to_string().contains("budgets do not sum to 0"));
    }

    #[test]
    fn reads_and_writes_flow() {
        let text = "flow 2 2\nnode 1 1\nnode 2 -1\n1 2 1 0.2\n2 1 1 0.5\n";
        let inst = read_instance(text).unwrap();
        assert_eq!(write_instance(&inst), text);
    }

    #[test]
    fn flow_edge_count_must_match_header() {
        let err = read_instance("flow 2 2\n1 2 1 0.2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn awkward_weights_round_trip_exactly() {
        let w = [0.1 + 0.2, 1.0 / 3.0, 5e-324, 1.0 - f64::EPSILON / 2.0];
        let inst = BipartiteInstance::from_matrix(2, 2, &w).unwrap();
        let back = read_instance(&write_bipartite(&inst)).unwrap();
        let Instance::Bipartite(back) = back else { panic!() };
        for (a, b) in inst.edges.iter().zip(&back.edges) {
            assert_eq!(a.weight.to_bits(), b.weight.to_bits());
        }
    }
}
