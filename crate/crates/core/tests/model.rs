use std::collections::BTreeSet;

use cct_core::{build, GraphFrame, NodeId, PathRecord, TIME, TIME_INC};
use cct_testkit::oracle::{keyed_paths, subtree_scan, subtree_sum};
use cct_testkit::{random_tree, random_unique_tree, rng, TreeSpec};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn recurrence_holds(gf: &GraphFrame) -> Result<(), String> {
    for id in gf.node_ids() {
        let excl = gf.metric(id, TIME).unwrap();
        let kids: f64 = gf.children(id).iter().map(|&c| gf.metric(c, TIME_INC).unwrap()).sum();
        let inc = gf.metric(id, TIME_INC).unwrap();
        if (inc - (excl + kids)).abs() > 1e-9 * inc.abs().max(1.0) {
            return Err(format!("{id}: inc {inc} != {excl} + {kids}"));
        }
    }
    Ok(())
}

#[test]
fn root_inclusive_equals_total_exclusive_on_500_nodes() {
    let gf = random_tree(&mut rng(500), &TreeSpec::new(500));
    assert_eq!(gf.len(), 500);
    let root = gf.roots()[0];
    let total = subtree_sum(&gf, TIME, root);
    let inc = gf.metric(root, TIME_INC).unwrap();
    assert!((inc - total).abs() <= 1e-9 * total.abs(), "{inc} vs {total}");
    recurrence_holds(&gf).unwrap();
}

#[test]
fn descendants_of_a_single_root_cover_the_tree() {
    let gf = random_tree(&mut rng(7), &TreeSpec::new(300));
    let root = gf.roots()[0];
    assert_eq!(gf.descendants(root).unwrap().len(), gf.len() - 1);
}

#[test]
fn traversal_errors_on_unknown_node() {
    let gf = random_tree(&mut rng(1), &TreeSpec::new(5));
    let missing = NodeId::from_index(99);
    assert!(gf.path_to_root(missing).is_err());
    assert!(gf.ancestors(missing).is_err());
    assert!(gf.descendants(missing).is_err());
}

fn spec(nodes: usize, roots: usize) -> TreeSpec {
    TreeSpec {
        roots,
        ..TreeSpec::new(nodes)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inclusive_recurrence_and_per_root_conservation(seed in any::<u64>(), n in 1usize..400, roots in 1usize..4) {
        let gf = random_tree(&mut rng(seed), &spec(n, roots));
        prop_assert!(recurrence_holds(&gf).is_ok(), "{:?}", recurrence_holds(&gf));
        for &r in gf.roots() {
            let total = subtree_sum(&gf, TIME, r);
            let inc = gf.metric(r, TIME_INC).unwrap();
            prop_assert!((inc - total).abs() <= 1e-9 * total.abs().max(1.0));
        }
    }

    #[test]
    fn structure_invariants(seed in any::<u64>(), n in 1usize..150, roots in 1usize..3) {
        let gf = random_tree(&mut rng(seed), &spec(n, roots));
        for id in gf.node_ids() {
            let node = gf.node(id).unwrap();
            match node.parent {
                Some(p) => {
                    prop_assert_eq!(node.depth, gf.node(p).unwrap().depth + 1);
                    prop_assert!(gf.children(p).contains(&id));
                }
                None => {
                    prop_assert_eq!(node.depth, 0);
                    prop_assert!(gf.roots().contains(&id));
                }
            }
            let path = gf.path_to_root(id).unwrap();
            prop_assert_eq!(path.len(), node.depth + 1);
            prop_assert_eq!(*path.last().unwrap(), id);
            prop_assert!(gf.roots().contains(&path[0]));
            for w in path.windows(2) {
                prop_assert_eq!(gf.node(w[1]).unwrap().parent, Some(w[0]));
            }

            let anc = gf.ancestors(id).unwrap();
            let desc = gf.descendants(id).unwrap();
            prop_assert!(anc.is_disjoint(&desc));
            prop_assert!(!anc.contains(&id) && !desc.contains(&id));
            let expected: BTreeSet<NodeId> = subtree_scan(&gf, id).into_iter().filter(|&d| d != id).collect();
            prop_assert_eq!(&desc, &expected);
            let expected_anc: BTreeSet<NodeId> = path[..path.len() - 1].iter().copied().collect();
            prop_assert_eq!(anc, expected_anc);
        }
    }

    #[test]
    fn build_is_order_insensitive(seed in any::<u64>(), n in 1usize..120) {
        let mut r = rng(seed);
        let gf = random_unique_tree(&mut r, &TreeSpec::new(n));
        let mut records: Vec<PathRecord> = gf
            .node_ids()
            .map(|id| {
                let path = gf.name_path(id).unwrap().join("/");
                PathRecord::from_names(&path, &[(TIME, gf.metric(id, TIME).unwrap())])
            })
            .collect();
        records.shuffle(&mut r);
        let rebuilt = build(&records).unwrap().finalize_inclusive().unwrap();
        let (ka, kb) = (keyed_paths(&gf), keyed_paths(&rebuilt));
        prop_assert_eq!(ka.len(), kb.len());
        for (k, &ia) in &ka {
            let ib = kb[k];
            for m in [TIME, TIME_INC] {
                let (x, y) = (gf.metric(ia, m).unwrap(), rebuilt.metric(ib, m).unwrap());
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }
    }
}
