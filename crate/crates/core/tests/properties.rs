use proptest::prelude::*;

use bpsmooth::bp::{BpMatching, RunOptions};
use bpsmooth::experiments::{estimate_survival, TrialRecord, Value};
use bpsmooth::instance::io::{read_instance, write_instance};
use bpsmooth::instance::{BipartiteInstance, Edge, Instance};
use bpsmooth::oracles::{enumerate_matchings, mwm};

/// Sparse instance with up to 4 nodes per side and weights in (0, 1].
fn sparse() -> impl Strategy<Value = BipartiteInstance> {
    (1usize..=4, 1usize..=4)
        .prop_flat_map(|(nl, nr)| {
            let cells = nl * nr;
            (
                Just((nl, nr)),
                proptest::collection::vec(proptest::option::weighted(0.7, 0.01f64..=1.0), cells),
            )
        })
        .prop_map(|((nl, nr), cells)| {
            let edges = cells
                .iter()
                .enumerate()
                .filter_map(|(k, w)| w.map(|w| Edge::new(k / nr, k % nr, w)))
                .collect();
            BipartiteInstance::new(nl, nr, edges).unwrap()
        })
}

/// Complete `K_{n,n}` with weights in (0, 1].
fn complete(max_n: usize) -> impl Strategy<Value = BipartiteInstance> {
    (2usize..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(0.01f64..=1.0, n * n)
            .prop_map(move |w| BipartiteInstance::from_matrix(n, n, &w).unwrap())
    })
}

fn best_weight(inst: &BipartiteInstance) -> f64 {
    enumerate_matchings(inst)
        .unwrap()
        .iter()
        .map(|m| m.weight)
        .fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disjoint_union_runs_components_independently(a in sparse(), b in sparse()) {
        let u = a.disjoint_union(&b);
        let (ba, bb, bu) = (BpMatching::new(&a).unwrap(), BpMatching::new(&b).unwrap(), BpMatching::new(&u).unwrap());
        let (mut sa, mut sb, mut su) = (ba.init_messages(false), bb.init_messages(false), bu.init_messages(false));
        for _ in 0..5 {
            sa = ba.step(&sa);
            sb = bb.step(&sb);
            su = bu.step(&su);
        }
        let (da, db, du) = (ba.decode(&sa), bb.decode(&sb), bu.decode(&su));
        let mut joined = da.assignment.clone();
        joined.extend(db.assignment.iter().map(|j| j.map(|j| j + a.n_right)));
        prop_assert_eq!(du.assignment, joined);
    }

    #[test]
    fn normalized_and_raw_decode_agree(inst in sparse()) {
        let bp = BpMatching::new(&inst).unwrap();
        let (mut raw, mut norm) = (bp.init_messages(false), bp.init_messages(true));
        for _ in 0..8 {
            raw = bp.step(&raw);
            norm = bp.step(&norm);
            let (dr, dn) = (bp.decode(&raw), bp.decode(&norm));
            if !dr.tie_detected && !dn.tie_detected {
                prop_assert_eq!(dr.assignment, dn.assignment);
            }
        }
    }

    #[test]
    fn positive_scaling_keeps_decoding(inst in sparse(), factor in 0.1f64..=1.0) {
        let scaled = inst.scaled(factor);
        let (b1, b2) = (BpMatching::new(&inst).unwrap(), BpMatching::new(&scaled).unwrap());
        let (mut s1, mut s2) = (b1.init_messages(true), b2.init_messages(true));
        for _ in 0..6 {
            s1 = b1.step(&s1);
            s2 = b2.step(&s2);
            let (d1, d2) = (b1.decode(&s1), b2.decode(&s2));
            if !d1.tie_detected && !d2.tie_detected {
                prop_assert_eq!(d1.assignment, d2.assignment);
            }
        }
    }

    #[test]
    fn converged_bp_on_small_complete_graphs_is_optimal(inst in complete(4)) {
        let best = mwm(&inst).unwrap();
        let r = BpMatching::new(&inst).unwrap().run(&RunOptions::new(20_000, 4).with_oracle(&best, inst.n_left));
        prop_assume!(r.converged);
        prop_assert_eq!(r.matched_oracle, Some(true));
    }

    #[test]
    fn instance_text_round_trips(inst in sparse()) {
        let text = write_instance(&Instance::Bipartite(inst.clone()));
        match read_instance(&text).unwrap() {
            Instance::Bipartite(back) => prop_assert_eq!(back, inst),
            Instance::Flow(_) => prop_assert!(false, "read a flow instance back"),
        }
    }

    #[test]
    fn zero_completion_keeps_the_optimum(inst in sparse()) {
        prop_assume!(inst.n_left == inst.n_right);
        let full = inst.zero_complete().unwrap();
        prop_assert!((best_weight(&inst) - best_weight(&full)).abs() < 1e-12);
    }

    #[test]
    fn hungarian_matches_enumeration(inst in sparse()) {
        let m = mwm(&inst).unwrap();
        prop_assert!((m.weight - best_weight(&inst)).abs() < 1e-12);
    }

    #[test]
    fn survival_curve_is_non_increasing(taus in proptest::collection::vec(1u64..200, 1..100)) {
        let records: Vec<TrialRecord> = taus
            .iter()
            .enumerate()
            .map(|(k, &t)| TrialRecord {
                trial: k as u64,
                seed: 0,
                n: 2,
                m: 4,
                phi: 1.0,
                family: "uniform".into(),
                observable: "tau",
                value: Value::Count(t.min(150)),
                censored: t > 150,
                wall_ms: 0.0,
            })
            .collect();
        let grid: Vec<usize> = (1..=150).step_by(7).collect();
        let curve = estimate_survival(&records, &grid, 150).unwrap();
        prop_assert!(curve.survival.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(curve.survival.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}
