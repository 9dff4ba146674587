//! Seeded generators and brute-force oracles shared by the test suites.
//!
//! Oracles here deliberately avoid the library's own traversal helpers and
//! recompute everything from parent links and raw metric columns.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use cct_core::layout::{overlaps, LabelCandidate, LayoutResult};
use cct_core::prune::{mass_prune, set_range, toggle_collapse, ColorMap, ViewState};
use cct_core::query::{CmpOp, PathPattern, Predicate, Quantifier, Step};
use cct_core::{Frame, GraphFrame, GraphFrameBuilder, NodeId, Query, TIME, TIME_INC};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub use rand_chacha::ChaCha8Rng as TestRng;

pub fn rng(seed: u64) -> TestRng {
    TestRng::seed_from_u64(seed)
}

pub const NAMES: [&str; 10] = [
    "main", "solve", "MPI_Send", "MPI_Recv", "compute", "io", "kernel", "sweep", "a", "b",
];

pub const CALLS: &str = "calls";

/// Shape and value distribution of a generated tree.
#[derive(Clone, Debug)]
pub struct TreeSpec {
    pub nodes: usize,
    pub roots: usize,
    /// Probability that an internal node has zero exclusive time.
    pub zero_internal: f64,
    /// Probability that a leaf has zero exclusive time.
    pub zero_leaf: f64,
    /// Integer-valued times when set.
    pub integer_values: bool,
    /// Adds a `calls` metric next to `time`.
    pub calls: bool,
}

impl TreeSpec {
    pub fn new(nodes: usize) -> Self {
        TreeSpec {
            nodes,
            roots: 1,
            zero_internal: 0.4,
            zero_leaf: 0.15,
            integer_values: false,
            calls: false,
        }
    }
}

/// Parent index for each node; the first `roots` entries are `None`.
fn random_parents(rng: &mut impl Rng, n: usize, roots: usize) -> Vec<Option<usize>> {
    (0..n)
        .map(|i| {
            if i < roots.max(1) {
                None
            } else if rng.gen_bool(0.3) {
                Some(i - 1)
            } else {
                Some(rng.gen_range(0..i))
            }
        })
        .collect()
}

fn random_value(rng: &mut impl Rng, integer: bool) -> f64 {
    if integer {
        rng.gen_range(1..1000) as f64
    } else {
        (rng.gen_range(0.001..100.0f64) * 1000.0).round() / 1000.0
    }
}

/// Random finalized tree with `time` and `time (inc)`. Sibling names may
/// repeat.
pub fn random_tree(rng: &mut impl Rng, spec: &TreeSpec) -> GraphFrame {
    let n = spec.nodes.max(1);
    let parents = random_parents(rng, n, spec.roots.min(n));
    let mut has_child = vec![false; n];
    for p in parents.iter().flatten() {
        has_child[*p] = true;
    }
    let metrics: Vec<&str> = if spec.calls { vec![TIME, CALLS] } else { vec![TIME] };
    let mut builder = GraphFrameBuilder::new(metrics.iter().copied()).unwrap();
    let mut ids: Vec<NodeId> = Vec::with_capacity(n);
    for i in 0..n {
        let zero_p = if has_child[i] {
            spec.zero_internal
        } else {
            spec.zero_leaf
        };
        let time = if rng.gen_bool(zero_p) {
            0.0
        } else {
            random_value(rng, spec.integer_values)
        };
        let mut record = vec![(TIME.to_string(), time)];
        if spec.calls {
            record.push((CALLS.to_string(), rng.gen_range(0..20) as f64));
        }
        let name = *NAMES.choose(rng).unwrap();
        let parent = parents[i].map(|p| ids[p]);
        ids.push(builder.push_node(parent, Frame::new(name), &record).unwrap());
    }
    builder.finish().unwrap().finalize_inclusive().unwrap()
}

/// Like [`random_tree`] but sibling names are unique, so the tree survives
/// folded-stack round trips and name-path alignment is unambiguous.
pub fn random_unique_tree(rng: &mut impl Rng, spec: &TreeSpec) -> GraphFrame {
    let text = folded_lines(rng, spec.nodes, spec.roots, spec.integer_values, &NAMES);
    cct_core::read_folded(&text).unwrap()
}

fn folded_lines(rng: &mut impl Rng, n: usize, roots: usize, integer: bool, pool: &[&str]) -> String {
    let n = n.max(1);
    let parents = random_parents(rng, n, roots.min(n));
    let mut paths: Vec<String> = Vec::with_capacity(n);
    let mut used: HashMap<Option<usize>, BTreeSet<String>> = HashMap::new();
    let mut out = String::new();
    for parent in &parents {
        let taken = used.entry(*parent).or_default();
        let base = *pool.choose(rng).unwrap();
        let mut name = base.to_string();
        let mut k = 1;
        while taken.contains(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        taken.insert(name.clone());
        let path = match parent {
            Some(p) => format!("{};{name}", paths[*p]),
            None => name,
        };
        out.push_str(&format!("{path} {}\n", random_value(rng, integer)));
        paths.push(path);
    }
    out
}

const KRIPKE_NAMES: [&str; 12] = [
    "Kripke::run",
    "solve",
    "SweepSolver",
    "sweep_comm",
    "LTimes",
    "LPlusTimes",
    "scattering",
    "source",
    "population",
    "MPI_Allreduce",
    "MPI_Isend",
    "MPI_Waitany",
];

/// Folded stacks shaped like a Kripke profile: `lines` lines, one per
/// distinct call path, integer sample counts.
pub fn kripke_folded(rng: &mut impl Rng, lines: usize) -> String {
    let body = folded_lines(rng, lines.saturating_sub(1), 1, true, &KRIPKE_NAMES);
    let mut out = String::from("# synthetic Kripke-shaped profile\nmain 1\n");
    for line in body.lines() {
        out.push_str("main;");
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Random view: metrics, encoding, range and a few collapses.
pub fn random_view_state(rng: &mut impl Rng, gf: &GraphFrame) -> ViewState {
    let metrics: Vec<&String> = gf.metric_names().iter().collect();
    let mut vs = ViewState::with_metrics(gf, metrics.choose(rng).unwrap(), metrics.choose(rng).unwrap()).unwrap();
    vs.color_map = if rng.gen_bool(0.5) {
        ColorMap::Diverging
    } else {
        ColorMap::SingleHue
    };
    vs.inverted = rng.gen_bool(0.3);
    let values: Vec<f64> = gf.node_ids().map(|id| gf.metric(id, &vs.primary).unwrap()).collect();
    if rng.gen_bool(0.75) {
        let a = *values.choose(rng).unwrap();
        let b = *values.choose(rng).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let lo = if rng.gen_bool(0.2) {
            lo - rng.gen_range(0.0..1.0)
        } else {
            lo
        };
        vs = mass_prune(gf, &vs, lo, hi).unwrap();
    }
    let ids: Vec<NodeId> = gf.node_ids().collect();
    for _ in 0..rng.gen_range(0..5) {
        let id = *ids.choose(rng).unwrap();
        if let Ok(next) = toggle_collapse(gf, &vs, id) {
            vs = next;
        }
    }
    if rng.gen_bool(0.1) {
        vs = set_range(gf, &vs, None).unwrap();
    }
    vs
}

const REGEXES: [&str; 8] = ["MPI_.*", "a|b", "s.*", ".*e.*", "main", "[A-Z].*", "\\w+", "x\"y\\\\z"];
const ODD_NAMES: [&str; 6] = ["main", "a", "MPI_Send", "quote\"d", "back\\slash", "tab\there"];

fn random_op(rng: &mut impl Rng) -> CmpOp {
    *CmpOp::ALL.choose(rng).unwrap()
}

fn random_predicate(rng: &mut impl Rng, metrics: &[&str]) -> Predicate {
    match rng.gen_range(0..6) {
        0 => Predicate::name_regex(*REGEXES.choose(rng).unwrap()).unwrap(),
        1 => Predicate::NameEq(ODD_NAMES.choose(rng).unwrap().to_string()),
        2 => {
            let value = match rng.gen_range(0..4) {
                0 => 0.0,
                1 => rng.gen_range(-5..200) as f64,
                2 => rng.gen_range(-1e3..1e3),
                _ => rng.gen_range(0.0..1.0) * 10f64.powi(rng.gen_range(-8..8)),
            };
            Predicate::metric(*metrics.choose(rng).unwrap(), random_op(rng), value).unwrap()
        }
        3 => Predicate::Depth {
            op: random_op(rng),
            value: rng.gen_range(-1..8),
        },
        4 => Predicate::ChildIndex {
            op: random_op(rng),
            value: rng.gen_range(0..4),
        },
        _ => Predicate::Leaf(rng.gen_bool(0.5)),
    }
}

fn random_step(rng: &mut impl Rng, metrics: &[&str]) -> Step {
    let quantifier = *[Quantifier::One, Quantifier::Star, Quantifier::Plus]
        .choose(rng)
        .unwrap();
    let count = if rng.gen_bool(0.4) { 0 } else { rng.gen_range(1..=3) };
    Step {
        quantifier,
        predicates: (0..count).map(|_| random_predicate(rng, metrics)).collect(),
    }
}

pub fn random_pattern(rng: &mut impl Rng, metrics: &[&str]) -> Query {
    let steps = (0..rng.gen_range(1..=4)).map(|_| random_step(rng, metrics)).collect();
    Query::Pattern(PathPattern::new(steps).unwrap())
}

/// Random query AST with boolean nesting up to `depth` levels.
pub fn random_query(rng: &mut impl Rng, metrics: &[&str], depth: usize) -> Query {
    if depth == 0 || rng.gen_bool(0.4) {
        return random_pattern(rng, metrics);
    }
    match rng.gen_range(0..3) {
        0 => random_query(rng, metrics, depth - 1).and(random_query(rng, metrics, depth - 1)),
        1 => random_query(rng, metrics, depth - 1).or(random_query(rng, metrics, depth - 1)),
        _ => random_query(rng, metrics, depth - 1).not(),
    }
}

/// Up to `max` label boxes packed densely enough to collide often.
pub fn random_labels(rng: &mut impl Rng, max: usize) -> Vec<LabelCandidate> {
    let n = rng.gen_range(0..=max);
    let spread = n as f64 * rng.gen_range(2.0..20.0);
    let uniform_height = rng.gen_bool(0.7);
    (0..n)
        .map(|i| LabelCandidate {
            id: NodeId::from_index(i),
            y: if rng.gen_bool(0.1) {
                (rng.gen_range(0.0..spread) / 7.0).round() * 7.0
            } else {
                rng.gen_range(0.0..spread.max(1.0))
            },
            text: format!("f{i}"),
            box_height: if uniform_height { 14.0 } else { rng.gen_range(6.0..22.0) },
            primary: rng.gen_range(0..6) as f64,
            depth: rng.gen_range(1..6),
        })
        .collect()
}

/// Oracles recomputed from parent links and raw metric values.
pub mod oracle {
    use super::*;

    fn parent(gf: &GraphFrame, id: NodeId) -> Option<NodeId> {
        gf.node(id).unwrap().parent
    }

    fn value(gf: &GraphFrame, metric: &str, id: NodeId) -> f64 {
        gf.metric(id, metric).unwrap()
    }

    /// True when `anc` is a proper ancestor of `id`, by walking parent links.
    pub fn is_proper_ancestor(gf: &GraphFrame, anc: NodeId, id: NodeId) -> bool {
        let mut cur = parent(gf, id);
        while let Some(p) = cur {
            if p == anc {
                return true;
            }
            cur = parent(gf, p);
        }
        false
    }

    /// Every node in the subtree of `id`, found by scanning all nodes.
    pub fn subtree_scan(gf: &GraphFrame, id: NodeId) -> Vec<NodeId> {
        gf.node_ids()
            .filter(|&n| n == id || is_proper_ancestor(gf, id, n))
            .collect()
    }

    pub fn subtree_sum(gf: &GraphFrame, metric: &str, id: NodeId) -> f64 {
        subtree_scan(gf, id).into_iter().map(|n| value(gf, metric, n)).sum()
    }

    pub fn subtree_mean(gf: &GraphFrame, metric: &str, id: NodeId) -> f64 {
        let members = subtree_scan(gf, id);
        members.iter().map(|&n| value(gf, metric, n)).sum::<f64>() / members.len() as f64
    }

    /// Nodes of `set` whose parent is not in `set`, excluding roots.
    pub fn orphans(gf: &GraphFrame, set: &BTreeSet<NodeId>) -> Vec<NodeId> {
        set.iter()
            .copied()
            .filter(|&id| parent(gf, id).is_some_and(|p| !set.contains(&p)))
            .collect()
    }

    pub fn ancestor_closure(gf: &GraphFrame, seed: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
        gf.node_ids()
            .filter(|&n| seed.iter().any(|&s| s == n || is_proper_ancestor(gf, n, s)))
            .collect()
    }

    /// Literal definition: protected iff zero and some descendant is nonzero.
    pub fn protected(gf: &GraphFrame, metric: &str, id: NodeId) -> bool {
        value(gf, metric, id) == 0.0
            && gf
                .node_ids()
                .any(|d| is_proper_ancestor(gf, id, d) && value(gf, metric, d) != 0.0)
    }

    /// Visible set by direct set computation.
    pub fn visible(gf: &GraphFrame, vs: &ViewState) -> BTreeSet<NodeId> {
        let kept: BTreeSet<NodeId> = gf
            .node_ids()
            .filter(|&id| {
                if protected(gf, &vs.primary, id) {
                    return false;
                }
                let v = value(gf, &vs.primary, id);
                match vs.range() {
                    None => v != 0.0,
                    Some((lo, hi)) => lo <= v && v <= hi,
                }
            })
            .collect();
        let mut shown = ancestor_closure(gf, &kept);
        shown.extend(gf.roots().iter().copied());
        shown
            .into_iter()
            .filter(|&id| !vs.collapsed().iter().any(|&c| is_proper_ancestor(gf, c, id)))
            .collect()
    }

    /// Bin index by linear scan of the edges; the last bin is closed.
    pub fn bin_by_scan(edges: &[f64], v: f64) -> usize {
        let bins = edges.len() - 1;
        if edges[0] == edges[bins] {
            return 0;
        }
        (0..bins)
            .find(|&b| edges[b] <= v && (v < edges[b + 1] || (b == bins - 1 && v <= edges[b + 1])))
            .expect("value within edges")
    }

    /// Child position among the parent's children, or among the roots.
    pub fn sibling_index(gf: &GraphFrame, id: NodeId) -> usize {
        let siblings = match parent(gf, id) {
            Some(p) => gf.children(p),
            None => gf.roots(),
        };
        siblings.iter().position(|&s| s == id).unwrap()
    }

    fn depth_by_walk(gf: &GraphFrame, id: NodeId) -> usize {
        let mut d = 0;
        let mut cur = parent(gf, id);
        while let Some(p) = cur {
            d += 1;
            cur = parent(gf, p);
        }
        d
    }

    fn cmp(op: CmpOp, a: f64, b: f64) -> bool {
        match op {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }

    thread_local! {
        static REGEX_CACHE: std::cell::RefCell<HashMap<String, regex::Regex>> = Default::default();
    }

    fn pred_holds(gf: &GraphFrame, id: NodeId, p: &Predicate) -> bool {
        let name = &gf.node(id).unwrap().frame.name;
        match p {
            Predicate::NameRegex(r) => REGEX_CACHE.with(|cache| {
                cache
                    .borrow_mut()
                    .entry(r.pattern().to_string())
                    .or_insert_with(|| regex::Regex::new(&format!("^(?:{})$", r.pattern())).unwrap())
                    .is_match(name)
            }),
            Predicate::NameEq(s) => name == s,
            Predicate::Metric { metric, op, value: v } => cmp(*op, value(gf, metric, id), *v),
            Predicate::Depth { op, value: v } => cmp(*op, depth_by_walk(gf, id) as f64, *v as f64),
            Predicate::ChildIndex { op, value: v } => cmp(*op, sibling_index(gf, id) as f64, *v as f64),
            Predicate::Leaf(want) => gf.children(id).is_empty() == *want,
        }
    }

    /// Can `path` be segmented to satisfy `steps` exactly? Plain backtracking.
    fn segments(gf: &GraphFrame, path: &[NodeId], steps: &[Step]) -> bool {
        let Some((step, rest)) = steps.split_first() else {
            return path.is_empty();
        };
        let ok = |id: &NodeId| step.predicates.iter().all(|p| pred_holds(gf, *id, p));
        let (min, max) = match step.quantifier {
            Quantifier::One => (1, 1),
            Quantifier::Star => (0, path.len()),
            Quantifier::Plus => (1, path.len()),
        };
        (min..=max.min(path.len())).any(|k| path[..k].iter().all(ok) && segments(gf, &path[k..], rest))
    }

    fn root_path(gf: &GraphFrame, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = parent(gf, id);
        while let Some(p) = cur {
            path.push(p);
            cur = parent(gf, p);
        }
        path.reverse();
        path
    }

    /// Query selection by enumerating every root-to-node path.
    pub fn select(gf: &GraphFrame, q: &Query) -> BTreeSet<NodeId> {
        let all: BTreeSet<NodeId> = gf.node_ids().collect();
        match q {
            Query::Pattern(p) => {
                let mut out = BTreeSet::new();
                for id in gf.node_ids() {
                    let path = root_path(gf, id);
                    if segments(gf, &path, p.steps()) {
                        out.extend(path);
                    }
                }
                out
            }
            Query::And(a, b) => select(gf, a).intersection(&select(gf, b)).copied().collect(),
            Query::Or(a, b) => select(gf, a).union(&select(gf, b)).copied().collect(),
            Query::Not(a) => all.difference(&select(gf, a)).copied().collect(),
        }
    }

    /// Name path with a `#k` ordinal for the k-th same-named earlier sibling.
    pub fn keyed_paths(gf: &GraphFrame) -> BTreeMap<Vec<(String, usize)>, NodeId> {
        let mut out = BTreeMap::new();
        for id in gf.node_ids() {
            let key = root_path(gf, id)
                .into_iter()
                .map(|n| {
                    let name = gf.node(n).unwrap().frame.name.clone();
                    let idx = sibling_index(gf, n);
                    let siblings = match parent(gf, n) {
                        Some(p) => gf.children(p),
                        None => gf.roots(),
                    };
                    let ordinal = siblings[..idx]
                        .iter()
                        .filter(|&&s| gf.node(s).unwrap().frame.name == name)
                        .count();
                    (name, ordinal)
                })
                .collect();
            out.insert(key, id);
        }
        out
    }

    /// Path-keyed ratio `a / b` over paths present in both frames; 0/0 is 1
    /// and other zero denominators are skipped.
    pub fn ratios(a: &GraphFrame, b: &GraphFrame, metric: &str) -> BTreeMap<Vec<(String, usize)>, f64> {
        let kb = keyed_paths(b);
        keyed_paths(a)
            .into_iter()
            .filter_map(|(k, ia)| {
                let ib = *kb.get(&k)?;
                let (x, y) = (value(a, metric, ia), value(b, metric, ib));
                match (x == 0.0, y == 0.0) {
                    (true, true) => Some((k, 1.0)),
                    (false, true) => None,
                    _ => Some((k, x / y)),
                }
            })
            .collect()
    }

    /// Population variance per path present in every frame.
    pub fn variances(frames: &[&GraphFrame], metric: &str) -> BTreeMap<Vec<(String, usize)>, f64> {
        let keyed: Vec<_> = frames.iter().map(|f| keyed_paths(f)).collect();
        keyed[0]
            .keys()
            .filter(|k| keyed.iter().all(|m| m.contains_key(*k)))
            .map(|k| {
                let xs: Vec<f64> = frames.iter().zip(&keyed).map(|(f, m)| value(f, metric, m[k])).collect();
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
                (k.clone(), var)
            })
            .collect()
    }

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0)
    }

    /// Structural isomorphism in child order with frames equal and metric
    /// values within `tol`; returns the first difference found.
    pub fn isomorphic(a: &GraphFrame, b: &GraphFrame, tol: f64) -> Result<(), String> {
        let mut names_a = a.metric_names().to_vec();
        let mut names_b = b.metric_names().to_vec();
        names_a.sort();
        names_b.sort();
        if names_a != names_b {
            return Err(format!("metric sets differ: {names_a:?} vs {names_b:?}"));
        }
        if a.roots().len() != b.roots().len() {
            return Err("root counts differ".into());
        }
        let mut stack: Vec<(NodeId, NodeId)> = a.roots().iter().copied().zip(b.roots().iter().copied()).collect();
        while let Some((x, y)) = stack.pop() {
            let (nx, ny) = (a.node(x).unwrap(), b.node(y).unwrap());
            if nx.frame != ny.frame {
                return Err(format!("frames differ: {:?} vs {:?}", nx.frame, ny.frame));
            }
            for m in &names_a {
                let (vx, vy) = (value(a, m, x), value(b, m, y));
                if !close(vx, vy, tol) {
                    return Err(format!("{m} differs at {}: {vx} vs {vy}", nx.frame.name));
                }
            }
            if nx.children.len() != ny.children.len() {
                return Err(format!("child counts differ at {}", nx.frame.name));
            }
            stack.extend(nx.children.iter().copied().zip(ny.children.iter().copied()));
        }
        Ok(())
    }

    /// Pairs of retained labels that overlap, by checking all pairs.
    pub fn overlapping_pairs(labels: &[LabelCandidate], kept: &BTreeSet<NodeId>) -> usize {
        let live: Vec<&LabelCandidate> = labels.iter().filter(|l| kept.contains(&l.id)).collect();
        let mut count = 0;
        for i in 0..live.len() {
            for j in i + 1..live.len() {
                if (live[i].y - live[j].y).abs() < (live[i].box_height + live[j].box_height) / 2.0 {
                    count += 1;
                }
            }
        }
        count
    }

    /// Removed labels that overlap no retained label.
    pub fn needless_removals(labels: &[LabelCandidate], kept: &BTreeSet<NodeId>) -> usize {
        labels
            .iter()
            .filter(|l| !kept.contains(&l.id))
            .filter(|l| !labels.iter().any(|k| overlaps(l, k) && kept.contains(&k.id)))
            .count()
    }

    /// Same-depth node pairs in one tree closer than `min_sep`, plus edges
    /// whose child is not exactly one level right of its parent.
    pub fn separation_violations(layout: &LayoutResult, min_sep: f64) -> usize {
        let mut by_depth: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for n in &layout.nodes {
            by_depth.entry(n.depth).or_default().push(n.y);
        }
        let mut violations = 0;
        for ys in by_depth.values_mut() {
            ys.sort_by(f64::total_cmp);
            violations += ys.windows(2).filter(|w| w[1] - w[0] < min_sep - 1e-9).count();
        }
        let pos: HashMap<NodeId, (f64, usize)> = layout.nodes.iter().map(|n| (n.id, (n.x, n.depth))).collect();
        violations += layout.edges.iter().filter(|(p, c)| pos[c].1 != pos[p].1 + 1).count();
        violations
    }
}

/// Total of `time (inc)` over roots minus total of `time` over all nodes,
/// relative to the latter.
pub fn conservation_error(gf: &GraphFrame) -> f64 {
    let excl: f64 = gf.node_ids().map(|id| gf.metric(id, TIME).unwrap()).sum();
    let inc: f64 = gf.roots().iter().map(|&r| gf.metric(r, TIME_INC).unwrap()).sum();
    (inc - excl).abs() / excl.abs().max(1.0)
}
