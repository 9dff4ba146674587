use std::collections::BTreeSet;

use cct_core::ingest::{read_folded, write_folded};
use cct_core::ops::{
    align, derive, filter_prune, imbalance, speedup, BinaryOp, DerivedKind, DerivedMetricSpec, DEFAULT_SPEEDUP_CLAMP,
    IMBALANCE, SPEEDUP,
};
use cct_core::{CctError, GraphFrame, NodeId, TIME, TIME_INC};
use cct_testkit::oracle::{ancestor_closure, keyed_paths, ratios, variances};
use cct_testkit::{random_tree, random_unique_tree, rng, TreeSpec};
use proptest::prelude::*;
use rand::Rng;

const RUN_A: &str = "\
main 2
main;init 4
main;init;read 6
main;init;parse 0
main;solve 1
main;solve;sweep 40
main;solve;sweep;MPI_Send 8
main;solve;sweep;MPI_Recv 12
main;solve;ltimes 20
main;solve;lplustimes 16
main;solve;scatter 10
main;solve;scatter;MPI_Allreduce 3
main;solve;source 5
main;comm;MPI_Barrier 7
main;comm;MPI_Wait 0
main;io 9
main;io;write 11
main;io;flush 2
main;finalize 1
";

const RUN_B: &str = "\
main 1
main;init 2
main;init;read 3
main;init;parse 0
main;solve 1
main;solve;sweep 10
main;solve;sweep;MPI_Send 16
main;solve;sweep;MPI_Recv 0
main;solve;ltimes 5
main;solve;lplustimes 4
main;solve;scatter 10
main;solve;scatter;MPI_Allreduce 6
main;solve;source 5
main;comm;MPI_Barrier 7
main;comm;MPI_Wait 3
main;io 3
main;io;write 11
main;io;fsync 2
main;gpu 4
";

fn path_of(gf: &GraphFrame, id: NodeId) -> String {
    gf.name_path(id).unwrap().join("/")
}

#[test]
fn hand_built_fixtures_have_twenty_nodes() {
    assert_eq!(read_folded(RUN_A).unwrap().len(), 20);
    assert_eq!(read_folded(RUN_B).unwrap().len(), 20);
}

#[test]
fn speedup_matches_path_keyed_ratios_on_fixtures() {
    let (a, b) = (read_folded(RUN_A).unwrap(), read_folded(RUN_B).unwrap());
    for metric in [TIME, TIME_INC] {
        let result = speedup(&a, &b, metric, DEFAULT_SPEEDUP_CLAMP).unwrap();
        let out = &result.frame;
        // intersection: everything except finalize, io/flush
        assert_eq!(out.len(), 18);
        let expected = ratios(&a, &b, metric);
        let got = keyed_paths(out);
        let warned: BTreeSet<NodeId> = result.warnings.iter().map(|w| w.node).collect();
        for (key, &id) in &got {
            let s = out.metric(id, SPEEDUP).unwrap();
            match expected.get(key) {
                Some(&r) => assert_eq!(s, r, "{metric} at {}", path_of(out, id)),
                None => {
                    assert!(warned.contains(&id), "{}", path_of(out, id));
                    assert_eq!(s, DEFAULT_SPEEDUP_CLAMP);
                }
            }
        }
        assert_eq!(got.len(), expected.len() + warned.len());
    }
    let excl = speedup(&a, &b, TIME, DEFAULT_SPEEDUP_CLAMP).unwrap();
    assert_eq!(excl.warnings.len(), 1);
    assert_eq!(path_of(&excl.frame, excl.warnings[0].node), "main/solve/sweep/MPI_Recv");
    assert_eq!(excl.warnings[0].numerator, 12.0);
    let parse = keyed_paths(&excl.frame)
        .into_iter()
        .find(|(k, _)| k.last().unwrap().0 == "parse")
        .unwrap()
        .1;
    assert_eq!(excl.frame.metric(parse, SPEEDUP).unwrap(), 1.0);
}

#[test]
fn speedup_output_keeps_first_frame_metrics_and_ids() {
    let (a, b) = (read_folded(RUN_A).unwrap(), read_folded(RUN_B).unwrap());
    let out = speedup(&a, &b, TIME, DEFAULT_SPEEDUP_CLAMP).unwrap().frame;
    for id in out.node_ids() {
        assert_eq!(out.metric(id, TIME).unwrap(), a.metric(id, TIME).unwrap());
        assert_eq!(path_of(&out, id), path_of(&a, id));
    }
}

#[test]
fn speedup_requires_metric() {
    let a = read_folded(RUN_A).unwrap();
    assert!(matches!(speedup(&a, &a, "bytes", 1e6), Err(CctError::MissingMetric(_))));
    assert!(matches!(imbalance(&[&a], TIME), Err(CctError::TooFewFrames { .. })));
}

#[test]
fn imbalance_of_two_values() {
    let a = read_folded("r 1\n").unwrap();
    let b = read_folded("r 3\n").unwrap();
    let out = imbalance(&[&a, &b], TIME).unwrap();
    assert_eq!(out.metric(out.roots()[0], IMBALANCE).unwrap(), 1.0);
}

#[test]
fn percent_of_total_on_fixture() {
    let a = read_folded(RUN_A).unwrap();
    let spec = DerivedMetricSpec {
        name: "pct".into(),
        kind: DerivedKind::PercentOfTotal {
            metric: TIME_INC.into(),
        },
        overwrite: false,
    };
    let out = derive(&a, &spec).unwrap();
    assert_eq!(out.metric(out.roots()[0], "pct").unwrap(), 100.0);
    assert!(matches!(derive(&out, &spec), Err(CctError::NameCollision(_))));
}

fn extra_leaf(gf: &GraphFrame, seed: u64) -> GraphFrame {
    let ids: Vec<NodeId> = gf.node_ids().collect();
    let host = ids[rng(seed).gen_range(0..ids.len())];
    let mut text = write_folded(gf).unwrap();
    text.push_str(&format!("{};brand_new_leaf 5\n", gf.name_path(host).unwrap().join(";")));
    read_folded(&text).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn align_against_self_with_one_extra_leaf(seed in any::<u64>(), n in 1usize..200) {
        let a = random_unique_tree(&mut rng(seed), &TreeSpec::new(n));
        let b = extra_leaf(&a, seed);
        let (ka, kb) = (keyed_paths(&a), keyed_paths(&b));
        let only_b: Vec<_> = kb.keys().filter(|k| !ka.contains_key(*k)).collect();
        prop_assert_eq!(only_b.len(), 1);

        let m = align(&a, &b);
        prop_assert_eq!(m.pairs.len(), a.len());
        prop_assert!(m.unmatched_a.is_empty());
        prop_assert_eq!(m.unmatched_b.len(), 1);
        let extra = *m.unmatched_b.iter().next().unwrap();
        prop_assert_eq!(kb[only_b[0]], extra);
    }

    #[test]
    fn alignment_is_converse_and_matches_equal_paths(seed in any::<u64>(), n in 1usize..120, m in 1usize..120) {
        let mut r = rng(seed);
        let a = random_tree(&mut r, &TreeSpec::new(n));
        let b = random_tree(&mut r, &TreeSpec::new(m));
        let ab = align(&a, &b);
        let ba = align(&b, &a);
        let fwd: BTreeSet<(NodeId, NodeId)> = ab.pairs.iter().copied().collect();
        let back: BTreeSet<(NodeId, NodeId)> = ba.pairs.iter().map(|&(x, y)| (y, x)).collect();
        prop_assert_eq!(&fwd, &back);
        prop_assert_eq!(&ab.unmatched_a, &ba.unmatched_b);
        prop_assert_eq!(ab.converse().unmatched_a, ab.unmatched_b.clone());

        let (ka, kb) = (keyed_paths(&a), keyed_paths(&b));
        let expected: BTreeSet<(NodeId, NodeId)> =
            ka.iter().filter_map(|(k, &x)| kb.get(k).map(|&y| (x, y))).collect();
        prop_assert_eq!(&fwd, &expected);
        prop_assert_eq!(ab.pairs.len() + ab.unmatched_a.len(), a.len());
        prop_assert_eq!(ab.pairs.len() + ab.unmatched_b.len(), b.len());
    }

    #[test]
    fn speedup_of_frame_with_itself_is_one(seed in any::<u64>(), n in 1usize..300) {
        let a = random_tree(&mut rng(seed), &TreeSpec::new(n));
        let r = speedup(&a, &a, TIME, DEFAULT_SPEEDUP_CLAMP).unwrap();
        prop_assert!(r.warnings.is_empty());
        prop_assert_eq!(r.frame.len(), a.len());
        for id in r.frame.node_ids() {
            prop_assert_eq!(r.frame.metric(id, SPEEDUP).unwrap(), 1.0);
        }
    }

    #[test]
    fn speedup_is_ancestor_closed_intersection(seed in any::<u64>(), n in 1usize..150, m in 1usize..150) {
        let mut r = rng(seed);
        let a = random_tree(&mut r, &TreeSpec::new(n));
        let b = random_tree(&mut r, &TreeSpec::new(m));
        let out = speedup(&a, &b, TIME, DEFAULT_SPEEDUP_CLAMP).unwrap().frame;
        let kb = keyed_paths(&b);
        for (k, id) in keyed_paths(&out) {
            prop_assert!(kb.contains_key(&k));
            if let Some(p) = out.node(id).unwrap().parent {
                prop_assert!(out.contains(p));
            }
        }
    }

    #[test]
    fn imbalance_matches_brute_force_variance(seed in any::<u64>(), n in 1usize..150) {
        let mut r = rng(seed);
        let base = random_unique_tree(&mut r, &TreeSpec::new(n));
        let frames: Vec<GraphFrame> = (0..3)
            .map(|_| {
                let time: Vec<f64> = (0..base.capacity()).map(|_| r.gen_range(0..50) as f64).collect();
                let f = base.with_metric(TIME, time, true).unwrap().finalize_inclusive().unwrap();
                let drop: Vec<bool> = (0..f.capacity()).map(|_| r.gen_bool(0.1)).collect();
                filter_prune(&f, |v| !drop[v.id().index()])
            })
            .collect();
        let refs: Vec<&GraphFrame> = frames.iter().collect();
        for metric in [TIME, TIME_INC] {
            let out = imbalance(&refs, metric).unwrap();
            let expected = variances(&refs, metric);
            let got = keyed_paths(&out);
            prop_assert_eq!(got.len(), expected.len());
            for (k, id) in got {
                let v = out.metric(id, IMBALANCE).unwrap();
                prop_assert!((v - expected[&k]).abs() <= 1e-12 * expected[&k].max(1.0), "{} vs {}", v, expected[&k]);
            }
        }
        let same = imbalance(&[&frames[0], &frames[0], &frames[0]], TIME).unwrap();
        for id in same.node_ids() {
            prop_assert_eq!(same.metric(id, IMBALANCE).unwrap(), 0.0);
        }
        let fractional = random_unique_tree(&mut r, &TreeSpec::new(n));
        let same = imbalance(&[&fractional, &fractional, &fractional], TIME_INC).unwrap();
        for id in same.node_ids() {
            prop_assert_eq!(same.metric(id, IMBALANCE).unwrap(), 0.0);
        }
    }

    #[test]
    fn derive_percent_and_binary(seed in any::<u64>(), n in 1usize..200, roots in 1usize..3) {
        let gf = random_tree(&mut rng(seed), &TreeSpec { roots, ..TreeSpec::new(n) });
        let before = gf.clone();
        let pct = derive(&gf, &DerivedMetricSpec {
            name: "pct".into(),
            kind: DerivedKind::PercentOfTotal { metric: TIME.into() },
            overwrite: false,
        }).unwrap();
        prop_assert_eq!(&gf, &before);
        for &root in gf.roots() {
            let total: f64 = gf.subtree(root).iter().map(|&id| pct.metric(id, "pct").unwrap()).sum();
            if gf.metric(root, TIME_INC).unwrap() > 0.0 {
                prop_assert!((total - 100.0).abs() < 1e-9, "{}", total);
            } else {
                prop_assert_eq!(total, 0.0);
            }
        }
        let zero = derive(&gf, &DerivedMetricSpec {
            name: "zero".into(),
            kind: DerivedKind::Binary { op: BinaryOp::Sub, lhs: TIME.into(), rhs: TIME.into() },
            overwrite: false,
        }).unwrap();
        for id in zero.node_ids() {
            prop_assert_eq!(zero.metric(id, "zero").unwrap(), 0.0);
        }
    }

    #[test]
    fn filter_prune_equals_closure_oracle(seed in any::<u64>(), n in 1usize..200, roots in 1usize..3) {
        let gf = random_tree(&mut rng(seed), &TreeSpec { roots, ..TreeSpec::new(n) });
        let out = filter_prune(&gf, |v| v.name() == "kernel");
        let hits: BTreeSet<NodeId> = gf.node_ids().filter(|&id| gf.node(id).unwrap().frame.name == "kernel").collect();
        let mut expected = ancestor_closure(&gf, &hits);
        expected.extend(gf.roots().iter().copied());
        let got: BTreeSet<NodeId> = out.node_ids().collect();
        prop_assert_eq!(got, expected);
        prop_assert_eq!(out.roots(), gf.roots());
        for id in out.node_ids() {
            prop_assert_eq!(out.metric(id, TIME).unwrap(), gf.metric(id, TIME).unwrap());
        }
        prop_assert_eq!(&filter_prune(&gf, |_| true), &gf);
        prop_assert_eq!(filter_prune(&gf, |_| false).len(), gf.roots().len());
    }
}
