//! Frame transformations: prune-style filtering, structural alignment and
//! derived comparison metrics.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::error::{CctError, Result};
use crate::model::{CctNode, GraphFrame, NodeId, TIME_INC};

/// Read-only view of one node handed to filter predicates.
#[derive(Copy, Clone)]
pub struct NodeView<'a> {
    gf: &'a GraphFrame,
    node: &'a CctNode,
}

impl<'a> NodeView<'a> {
    pub fn new(gf: &'a GraphFrame, id: NodeId) -> Option<Self> {
        gf.node(id).map(|node| NodeView { gf, node })
    }

    pub fn id(&self) -> NodeId {
        self.node.id
    }

    pub fn name(&self) -> &'a str {
        &self.node.frame.name
    }

    pub fn node(&self) -> &'a CctNode {
        self.node
    }

    pub fn depth(&self) -> usize {
        self.node.depth
    }

    pub fn is_leaf(&self) -> bool {
        self.node.children.is_empty()
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.gf.column(name).ok().map(|c| c[self.node.id.index()])
    }
}

/// Keeps every node satisfying `predicate` together with all of its
/// ancestors. Roots are always kept and ids are preserved.
pub fn filter_prune<F>(gf: &GraphFrame, mut predicate: F) -> GraphFrame
where
    F: FnMut(NodeView<'_>) -> bool,
{
    let mut seed = vec![false; gf.capacity()];
    for node in gf.nodes() {
        seed[node.id.index()] = predicate(NodeView { gf, node });
    }
    gf.restrict(&gf.ancestor_closure_mask(&seed))
}

/// Same as [`filter_prune`] with an explicit keep-set.
pub fn prune_to(gf: &GraphFrame, keep: &BTreeSet<NodeId>) -> GraphFrame {
    gf.restrict(&gf.ancestor_closure_mask(&gf.mask(keep)))
}

/// Partial bijection between the nodes of two frames.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AlignmentMap {
    /// Matched `(a, b)` pairs in preorder of `a`.
    pub pairs: Vec<(NodeId, NodeId)>,
    pub unmatched_a: BTreeSet<NodeId>,
    pub unmatched_b: BTreeSet<NodeId>,
}

impl AlignmentMap {
    pub fn converse(&self) -> AlignmentMap {
        let mut pairs: Vec<(NodeId, NodeId)> = self.pairs.iter().map(|&(a, b)| (b, a)).collect();
        pairs.sort();
        AlignmentMap {
            pairs,
            unmatched_a: self.unmatched_b.clone(),
            unmatched_b: self.unmatched_a.clone(),
        }
    }

    /// Lookup table from `a` slot index to matched `b` id.
    fn forward(&self, capacity: usize) -> Vec<Option<NodeId>> {
        let mut out = vec![None; capacity];
        for &(a, b) in &self.pairs {
            out[a.index()] = Some(b);
        }
        out
    }
}

fn match_siblings(
    a: &GraphFrame,
    b: &GraphFrame,
    a_ids: &[NodeId],
    b_ids: &[NodeId],
    matched: &mut Vec<(NodeId, NodeId)>,
    unmatched_a: &mut Vec<NodeId>,
    unmatched_b: &mut Vec<NodeId>,
) {
    let mut by_name: HashMap<&str, VecDeque<NodeId>> = HashMap::new();
    for &id in b_ids {
        by_name.entry(&b.get(id).unwrap().frame.name).or_default().push_back(id);
    }
    let mut used = BTreeSet::new();
    for &id in a_ids {
        let name = a.get(id).unwrap().frame.name.as_str();
        match by_name.get_mut(name).and_then(VecDeque::pop_front) {
            Some(other) => {
                used.insert(other);
                matched.push((id, other));
            }
            None => unmatched_a.push(id),
        }
    }
    unmatched_b.extend(b_ids.iter().filter(|id| !used.contains(id)));
}

/// Matches nodes whose root-to-node frame-name paths are equal. Siblings
/// sharing a name are paired by their order of appearance. File and line are
/// ignored so that rebuilt binaries still align.
pub fn align(a: &GraphFrame, b: &GraphFrame) -> AlignmentMap {
    let mut out = AlignmentMap::default();
    let mut stack: Vec<(NodeId, NodeId)> = Vec::new();
    let mut level = Vec::new();
    let (mut ua, mut ub) = (Vec::new(), Vec::new());
    match_siblings(a, b, a.roots(), b.roots(), &mut level, &mut ua, &mut ub);
    stack.extend(level.drain(..).rev());
    while let Some((na, nb)) = stack.pop() {
        out.pairs.push((na, nb));
        match_siblings(a, b, a.children(na), b.children(nb), &mut level, &mut ua, &mut ub);
        stack.extend(level.drain(..).rev());
    }
    for id in ua {
        out.unmatched_a.extend(a.subtree(id));
    }
    for id in ub {
        out.unmatched_b.extend(b.subtree(id));
    }
    out
}

/// A node whose speedup denominator was zero while the numerator was not.
#[derive(Clone, Debug, PartialEq)]
pub struct DivisionDegenerate {
    pub node: NodeId,
    pub numerator: f64,
}

#[derive(Clone, Debug)]
pub struct SpeedupResult {
    pub frame: GraphFrame,
    pub warnings: Vec<DivisionDegenerate>,
}

pub const SPEEDUP: &str = "speedup";
pub const IMBALANCE: &str = "imbalance";
pub const DEFAULT_SPEEDUP_CLAMP: f64 = 1e6;

/// Per-node `metric(a) / metric(b)` over the intersection of `a` and `b`.
///
/// The result keeps `a`'s ids and metrics. `0/0` is 1.0; `x/0` is clamped to
/// `±clamp` and reported in `warnings`.
pub fn speedup(a: &GraphFrame, b: &GraphFrame, metric: &str, clamp: f64) -> Result<SpeedupResult> {
    let va = a.column(metric)?;
    let vb = b.column(metric)?;
    let map = align(a, b);
    let mut keep = vec![false; a.capacity()];
    let mut ratio = vec![0.0; a.capacity()];
    let mut warnings = Vec::new();
    for &(na, nb) in &map.pairs {
        keep[na.index()] = true;
        let (num, den) = (va[na.index()], vb[nb.index()]);
        let r = if den == 0.0 {
            if num == 0.0 {
                1.0
            } else {
                warnings.push(DivisionDegenerate {
                    node: na,
                    numerator: num,
                });
                clamp.copysign(num)
            }
        } else {
            num / den
        };
        ratio[na.index()] = if r.is_finite() { r } else { clamp.copysign(r) };
    }
    let frame = a.restrict(&keep).with_metric(SPEEDUP, ratio, true)?;
    Ok(SpeedupResult { frame, warnings })
}

/// Population variance of `metric` across `frames`, on the nodes present in
/// every frame. The result keeps the first frame's ids and metrics.
pub fn imbalance(frames: &[&GraphFrame], metric: &str) -> Result<GraphFrame> {
    if frames.len() < 2 {
        return Err(CctError::TooFewFrames {
            needed: 2,
            got: frames.len(),
        });
    }
    let base = frames[0];
    let columns: Vec<&[f64]> = frames.iter().map(|f| f.column(metric)).collect::<Result<_>>()?;
    let maps: Vec<Vec<Option<NodeId>>> = frames[1..]
        .iter()
        .map(|f| align(base, f).forward(base.capacity()))
        .collect();
    let mut keep = vec![false; base.capacity()];
    let mut var = vec![0.0; base.capacity()];
    let mut values = Vec::with_capacity(frames.len());
    for id in base.node_ids() {
        let i = id.index();
        values.clear();
        values.push(columns[0][i]);
        let mut all = true;
        for (k, m) in maps.iter().enumerate() {
            match m[i] {
                Some(other) => values.push(columns[k + 1][other.index()]),
                None => {
                    all = false;
                    break;
                }
            }
        }
        if !all {
            continue;
        }
        keep[i] = true;
        var[i] = population_variance(&values);
    }
    base.restrict(&keep).with_metric(IMBALANCE, var, true)
}

/// Welford's update; identical values give exactly 0.
fn population_variance(values: &[f64]) -> f64 {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    m2 / values.len() as f64
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl std::str::FromStr for BinaryOp {
    type Err = CctError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "add" | "+" => Ok(BinaryOp::Add),
            "sub" | "-" => Ok(BinaryOp::Sub),
            "mul" | "*" => Ok(BinaryOp::Mul),
            "div" | "/" => Ok(BinaryOp::Div),
            other => Err(CctError::InvalidArgument(format!("unknown operator `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum DerivedKind<'a> {
    /// `metric(n) / metric_b(n)` against another frame.
    Speedup {
        other: &'a GraphFrame,
        metric: String,
    },
    /// Variance of `metric` across this frame and `others`.
    Imbalance {
        others: Vec<&'a GraphFrame>,
        metric: String,
    },
    /// `100 * metric(n) / total` where total is the root's inclusive value.
    PercentOfTotal {
        metric: String,
    },
    Binary {
        op: BinaryOp,
        lhs: String,
        rhs: String,
    },
}

#[derive(Clone, Debug)]
pub struct DerivedMetricSpec<'a> {
    pub name: String,
    pub kind: DerivedKind<'a>,
    pub overwrite: bool,
}

/// Name of the inclusive counterpart of `metric`, if the frame has one.
fn inclusive_of(gf: &GraphFrame, metric: &str) -> Option<String> {
    if metric.ends_with(" (inc)") {
        return Some(metric.to_string());
    }
    let inc = format!("{metric} (inc)");
    if gf.has_metric(&inc) {
        Some(inc)
    } else if metric == crate::model::TIME && gf.has_metric(TIME_INC) {
        Some(TIME_INC.to_string())
    } else {
        None
    }
}

/// Adds the metric described by `spec`. The input is never modified.
pub fn derive(gf: &GraphFrame, spec: &DerivedMetricSpec<'_>) -> Result<GraphFrame> {
    if gf.has_metric(&spec.name) && !spec.overwrite {
        return Err(CctError::NameCollision(spec.name.clone()));
    }
    let rename = |frame: GraphFrame, from: &str| -> Result<GraphFrame> {
        if spec.name == from {
            return Ok(frame);
        }
        let col = frame.column(from)?.to_vec();
        frame.with_metric(&spec.name, col, true)
    };
    match &spec.kind {
        DerivedKind::Speedup { other, metric } => {
            let r = speedup(gf, other, metric, DEFAULT_SPEEDUP_CLAMP)?;
            rename(r.frame, SPEEDUP)
        }
        DerivedKind::Imbalance { others, metric } => {
            let mut all = vec![gf];
            all.extend(others.iter().copied());
            rename(imbalance(&all, metric)?, IMBALANCE)
        }
        DerivedKind::PercentOfTotal { metric } => {
            let values = gf.column(metric)?;
            let totals: Vec<(NodeId, f64)> = match inclusive_of(gf, metric) {
                Some(inc) => {
                    let inc = gf.column(&inc)?;
                    gf.roots().iter().map(|r| (*r, inc[r.index()])).collect()
                }
                None => gf
                    .roots()
                    .iter()
                    .map(|&r| (r, gf.subtree(r).iter().map(|n| values[n.index()]).sum()))
                    .collect(),
            };
            let mut out = vec![0.0; gf.capacity()];
            for (root, total) in totals {
                for n in gf.subtree(root) {
                    out[n.index()] = if total == 0.0 {
                        0.0
                    } else {
                        100.0 * values[n.index()] / total
                    };
                }
            }
            gf.with_metric(&spec.name, out, true)
        }
        DerivedKind::Binary { op, lhs, rhs } => {
            let (l, r) = (gf.column(lhs)?, gf.column(rhs)?);
            let mut out = vec![0.0; gf.capacity()];
            for id in gf.node_ids() {
                let i = id.index();
                out[i] = match op {
                    BinaryOp::Add => l[i] + r[i],
                    BinaryOp::Sub => l[i] - r[i],
                    BinaryOp::Mul => l[i] * r[i],
                    BinaryOp::Div if r[i] == 0.0 && l[i] == 0.0 => 0.0,
                    BinaryOp::Div => l[i] / r[i],
                };
            }
            gf.with_metric(&spec.name, out, true)
        }
    }
}
