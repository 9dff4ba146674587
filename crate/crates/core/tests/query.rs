use std::collections::BTreeSet;

use cct_core::ops::filter_prune;
use cct_core::prune::{toggle_collapse, visible, ViewState};
use cct_core::query::{apply, from_view, parse, select};
use cct_core::{read_folded, resolve_path, CctError, GraphFrame, NodeId, Query};
use cct_testkit::oracle;
use cct_testkit::{random_query, random_tree, random_view_state, rng, TreeSpec, CALLS};
use proptest::prelude::*;

const METRICS: [&str; 3] = ["time", "time (inc)", CALLS];

/// 50 nodes: a root, five ranks of ten calls each, with `solve*` names at
/// several depths.
fn crafted_50() -> GraphFrame {
    let mut text = String::from("main 1\n");
    for rank in 0..5 {
        let top = if rank % 2 == 0 { "solve" } else { "setup" };
        let top = format!("{top}_{rank}");
        text.push_str(&format!("main;{top} 1\n"));
        for i in 0..4 {
            let mid = if i == 1 {
                "solver_loop".to_string()
            } else {
                format!("step{i}")
            };
            text.push_str(&format!("main;{top};{mid} {}\n", i + 1));
            let leaf = if i % 2 == 0 { "solve" } else { "MPI_Wait" };
            text.push_str(&format!("main;{top};{mid};{leaf} {}\n", i + rank + 1));
        }
        text.push_str(&format!("main;{top};xsolve 1\n"));
    }
    read_folded(&text).unwrap()
}

#[test]
fn crafted_tree_regex_query_matches_path_enumeration() {
    let gf = crafted_50();
    assert_eq!(gf.len(), 1 + 5 * 10);
    let q = parse(r#"*/["name"=~"solve.*"]"#).unwrap();
    let got = select(&gf, &q).unwrap();
    assert_eq!(got, oracle::select(&gf, &q));
    // every solve* node plus its ancestors; xsolve and the setup_* leaves named MPI_Wait are out
    let names: BTreeSet<&str> = got.iter().map(|&id| gf.node(id).unwrap().frame.name.as_str()).collect();
    assert!(names.contains("solver_loop") && names.contains("setup_1"));
    assert!(!names.contains("xsolve") && !names.contains("MPI_Wait"));
}

#[test]
fn grammar_examples() {
    let q = parse(r#"*/["name"=~"MPI_.*"]"#).unwrap();
    assert_eq!(q.to_string(), r#"*/["name"=~"MPI_.*"]"#);
    let q = parse(r#"NOT (*/["depth">=5]+)"#).unwrap();
    assert!(matches!(q, Query::Not(_)));
    assert_eq!(parse(&q.to_string()).unwrap(), q);
}

#[test]
fn select_reports_unknown_metric() {
    let gf = crafted_50();
    match select(&gf, &parse(r#"*/["bytes">1]"#).unwrap()) {
        Err(CctError::UnknownMetric(m)) => assert_eq!(m, "bytes"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn single_collapse_exports_all_but_descendants() {
    let gf = crafted_50();
    let x = resolve_path(&gf, "main/solve_2").unwrap();
    let vs = toggle_collapse(&gf, &ViewState::new(&gf).unwrap(), x).unwrap();
    let q = from_view(&gf, &vs).unwrap();
    let all: BTreeSet<NodeId> = gf.node_ids().collect();
    let desc = gf.descendants(x).unwrap();
    let expected: BTreeSet<NodeId> = all.difference(&desc).copied().collect();
    // fresh view hides nothing here: every node has a nonzero inclusive time
    assert_eq!(visible(&gf, &vs).unwrap(), expected);
    assert_eq!(select(&gf, &parse(&q.to_string()).unwrap()).unwrap(), expected);
}

#[test]
fn apply_extremes() {
    let gf = crafted_50();
    assert_eq!(apply(&gf, &Query::all()).unwrap(), gf);
    assert_eq!(apply(&gf, &Query::all().not()).unwrap().len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn text_round_trip(seed in any::<u64>()) {
        let q = random_query(&mut rng(seed), &METRICS, 4);
        let text = q.to_string();
        let back = parse(&text);
        prop_assert_eq!(back.as_ref(), Ok(&q), "{}", text);
        prop_assert_eq!(back.unwrap().to_string(), text);
    }
}

fn small_tree(seed: u64, n: usize) -> GraphFrame {
    random_tree(
        &mut rng(seed),
        &TreeSpec {
            calls: true,
            roots: 1 + (seed % 2) as usize,
            ..TreeSpec::new(n)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn select_matches_path_enumeration(seed in any::<u64>(), n in 1usize..=60) {
        let gf = small_tree(seed, n);
        let q = random_query(&mut rng(seed ^ 0x5eed), &METRICS, 3);
        let got = select(&gf, &q).unwrap();
        prop_assert_eq!(&got, &oracle::select(&gf, &q), "{}", q);
        if let Query::Pattern(_) = q {
            prop_assert!(oracle::orphans(&gf, &got).is_empty());
        }
    }

    #[test]
    fn or_is_monotone_and_not_antitone(seed in any::<u64>(), n in 1usize..=60) {
        let gf = small_tree(seed, n);
        let mut r = rng(seed);
        let (a, b) = (random_query(&mut r, &METRICS, 2), random_query(&mut r, &METRICS, 2));
        let sa = select(&gf, &a).unwrap();
        let sab = select(&gf, &a.clone().or(b.clone())).unwrap();
        prop_assert!(sa.is_subset(&sab));
        let na = select(&gf, &a.clone().not()).unwrap();
        let nab = select(&gf, &a.or(b).not()).unwrap();
        prop_assert!(nab.is_subset(&na));
    }

    #[test]
    fn apply_equals_prune_of_selection(seed in any::<u64>(), n in 1usize..=60) {
        let gf = small_tree(seed, n);
        let q = random_query(&mut rng(!seed), &METRICS, 3);
        let keep = oracle::select(&gf, &q);
        let expected = filter_prune(&gf, |v| keep.contains(&v.id()));
        prop_assert_eq!(apply(&gf, &q).unwrap(), expected);
    }

    #[test]
    fn exported_view_reselects_visible_set(seed in any::<u64>(), n in 1usize..300) {
        let gf = small_tree(seed, n);
        let vs = random_view_state(&mut rng(seed), &gf);
        let q = from_view(&gf, &vs).unwrap();
        let reparsed = parse(&q.to_string()).unwrap();
        prop_assert_eq!(&reparsed, &q);
        prop_assert_eq!(select(&gf, &reparsed).unwrap(), visible(&gf, &vs).unwrap());
    }
}
