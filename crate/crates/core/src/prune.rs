//! Interactive tree reduction: manual subtree collapse and metric-range
//! mass pruning.
//!
//! Nodes are only ever removed from the leaves upward. The visible set is
//! always ancestor-closed and always contains every root.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{CctError, Result};
use crate::model::{GraphFrame, NodeId, TIME, TIME_INC};
use crate::path::{node_path, resolve_path};

pub const DEFAULT_BINS: usize = 20;
pub const VIEWSTATE_VERSION: u32 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColorMap {
    #[default]
    Diverging,
    SingleHue,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiusScale {
    #[default]
    Linear,
    Sqrt,
}

/// Everything needed to reproduce a view of a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewState {
    pub primary: String,
    pub secondary: String,
    pub color_map: ColorMap,
    pub inverted: bool,
    /// Value at which the diverging map switches hue; midrange when unset.
    pub pivot: Option<f64>,
    pub radius_scale: RadiusScale,
    collapsed: BTreeSet<NodeId>,
    range: Option<(f64, f64)>,
    pub selection: BTreeSet<NodeId>,
}

impl ViewState {
    /// Fresh view: primary `time (inc)` and secondary `time` when present,
    /// otherwise the first metric for both. No collapses, default range.
    pub fn new(gf: &GraphFrame) -> Result<ViewState> {
        let first = gf
            .metric_names()
            .first()
            .ok_or_else(|| CctError::MissingMetric("<any>".into()))?;
        let pick = |want: &str| {
            if gf.has_metric(want) {
                want.to_string()
            } else {
                first.clone()
            }
        };
        Ok(ViewState {
            primary: pick(TIME_INC),
            secondary: pick(TIME),
            color_map: ColorMap::default(),
            inverted: false,
            pivot: None,
            radius_scale: RadiusScale::default(),
            collapsed: BTreeSet::new(),
            range: None,
            selection: BTreeSet::new(),
        })
    }

    pub fn with_metrics(gf: &GraphFrame, primary: &str, secondary: &str) -> Result<ViewState> {
        gf.metric_index(primary)?;
        gf.metric_index(secondary)?;
        let mut vs = ViewState::new(gf)?;
        vs.primary = primary.to_string();
        vs.secondary = secondary.to_string();
        Ok(vs)
    }

    /// Manually collapsed subtree roots.
    pub fn collapsed(&self) -> &BTreeSet<NodeId> {
        &self.collapsed
    }

    /// Mass-prune range; `None` means the default rule (hide prunable nodes
    /// whose primary metric is exactly 0.0).
    pub fn range(&self) -> Option<(f64, f64)> {
        self.range
    }

    /// Checks that the state refers only to nodes and metrics of `gf`.
    pub fn validate(&self, gf: &GraphFrame) -> Result<()> {
        gf.metric_index(&self.primary)?;
        gf.metric_index(&self.secondary)?;
        for &id in self.collapsed.iter().chain(&self.selection) {
            if !gf.contains(id) {
                return Err(CctError::StaleView(format!("node {id} is not in the frame")));
            }
        }
        for &id in &self.collapsed {
            if gf.ancestors(id)?.iter().any(|a| self.collapsed.contains(a)) {
                return Err(CctError::StaleView(format!("collapse of {id} is nested")));
            }
        }
        if let Some((lo, hi)) = self.range {
            if lo > hi {
                return Err(CctError::InvertedRange { lo, hi });
            }
        }
        Ok(())
    }
}

/// Partition of nodes into prunable and protected.
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub prunable: BTreeSet<NodeId>,
    pub protected: BTreeSet<NodeId>,
}

/// Protected nodes have a zero metric but a nonzero descendant; hiding them
/// would disconnect the tree. Returned as a mask over node slots.
pub fn protected_mask(gf: &GraphFrame, metric: &str) -> Result<Vec<bool>> {
    let values = gf.column(metric)?;
    let mut nonzero_below = vec![false; gf.capacity()];
    let mut protected = vec![false; gf.capacity()];
    for id in gf.preorder().into_iter().rev() {
        let i = id.index();
        let child_nonzero = gf.children(id).iter().any(|c| nonzero_below[c.index()]);
        protected[i] = values[i] == 0.0 && child_nonzero;
        nonzero_below[i] = values[i] != 0.0 || child_nonzero;
    }
    Ok(protected)
}

pub fn classify(gf: &GraphFrame, metric: &str) -> Result<Classification> {
    let protected = protected_mask(gf, metric)?;
    let (p, q): (Vec<NodeId>, Vec<NodeId>) = gf.node_ids().partition(|id| !protected[id.index()]);
    Ok(Classification {
        prunable: p.into_iter().collect(),
        protected: q.into_iter().collect(),
    })
}

/// Primary-metric distribution split into prunable (top) and protected
/// (bottom) counts.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ButterflyHistogram {
    pub metric: String,
    pub bin_count: usize,
    pub bin_edges: Vec<f64>,
    pub prunable_counts: Vec<usize>,
    pub protected_counts: Vec<usize>,
}

impl ButterflyHistogram {
    pub fn total(&self) -> usize {
        self.prunable_counts.iter().sum::<usize>() + self.protected_counts.iter().sum::<usize>()
    }

    /// Bin holding `v`: half-open bins except the last, which is closed.
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        let edges = &self.bin_edges;
        let (lo, hi) = (edges[0], edges[self.bin_count]);
        if !(lo..=hi).contains(&v) {
            return None;
        }
        if hi == lo {
            return Some(0);
        }
        let n = self.bin_count;
        let mut i = (((v - lo) / (hi - lo)) * n as f64).floor() as usize;
        i = i.min(n - 1);
        while i > 0 && v < edges[i] {
            i -= 1;
        }
        while i + 1 < n && v >= edges[i + 1] {
            i += 1;
        }
        Some(i)
    }
}

/// Uniform-width histogram over the full `[min, max]` of `metric`.
pub fn histogram(gf: &GraphFrame, metric: &str, bins: usize) -> Result<ButterflyHistogram> {
    let values = gf.column(metric)?;
    let (min, max) = gf
        .node_ids()
        .map(|id| values[id.index()])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    histogram_in(gf, metric, bins, min, max)
}

/// Histogram restricted to nodes whose value lies in `[lo, hi]`.
pub fn histogram_in(gf: &GraphFrame, metric: &str, bins: usize, lo: f64, hi: f64) -> Result<ButterflyHistogram> {
    if bins == 0 {
        return Err(CctError::InvalidArgument("bin count must be at least 1".into()));
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(CctError::InvalidArgument("histogram bounds must be finite".into()));
    }
    if lo > hi {
        return Err(CctError::InvertedRange { lo, hi });
    }
    let values = gf.column(metric)?;
    let protected = protected_mask(gf, metric)?;
    let bin_count = if lo == hi { 1 } else { bins };
    let mut bin_edges: Vec<f64> = (0..=bin_count)
        .map(|i| lo + (hi - lo) * (i as f64 / bin_count as f64))
        .collect();
    bin_edges[bin_count] = hi;
    let mut h = ButterflyHistogram {
        metric: metric.to_string(),
        bin_count,
        bin_edges,
        prunable_counts: vec![0; bin_count],
        protected_counts: vec![0; bin_count],
    };
    for id in gf.node_ids() {
        if let Some(b) = h.bin_of(values[id.index()]) {
            if protected[id.index()] {
                h.protected_counts[b] += 1;
            } else {
                h.prunable_counts[b] += 1;
            }
        }
    }
    Ok(h)
}

/// Nodes surviving the mass-prune range alone, as a mask.
fn range_visible_mask(gf: &GraphFrame, vs: &ViewState) -> Result<Vec<bool>> {
    let values = gf.column(&vs.primary)?;
    let protected = protected_mask(gf, &vs.primary)?;
    let mut keep = vec![false; gf.capacity()];
    for id in gf.node_ids() {
        let i = id.index();
        if protected[i] {
            continue;
        }
        keep[i] = match vs.range {
            None => values[i] != 0.0,
            Some((lo, hi)) => lo <= values[i] && values[i] <= hi,
        };
    }
    Ok(gf.ancestor_closure_mask(&keep))
}

/// Visible nodes as a mask over node slots.
pub fn visible_mask(gf: &GraphFrame, vs: &ViewState) -> Result<Vec<bool>> {
    vs.validate(gf)?;
    let mut mask = range_visible_mask(gf, vs)?;
    for &anchor in &vs.collapsed {
        for d in gf.subtree(anchor).into_iter().skip(1) {
            mask[d.index()] = false;
        }
    }
    Ok(mask)
}

/// Nodes left after the mass-prune range, minus strict descendants of
/// collapsed nodes.
pub fn visible(gf: &GraphFrame, vs: &ViewState) -> Result<BTreeSet<NodeId>> {
    let mask = visible_mask(gf, vs)?;
    Ok(gf.node_ids().filter(|id| mask[id.index()]).collect())
}

/// Roots of subtrees hidden by the range whose parent is still shown and not
/// collapsed, in preorder.
pub fn elided_roots(gf: &GraphFrame, vs: &ViewState) -> Result<Vec<NodeId>> {
    let mask = visible_mask(gf, vs)?;
    Ok(gf
        .preorder()
        .into_iter()
        .filter(|&id| {
            let parent = gf.node(id).and_then(|n| n.parent);
            !mask[id.index()] && parent.is_some_and(|p| mask[p.index()] && !vs.collapsed.contains(&p))
        })
        .collect())
}

/// Returns a state with the range set to `[lo, hi]`. Manual collapses whose
/// node the range hides are dropped; the others are kept.
pub fn mass_prune(gf: &GraphFrame, vs: &ViewState, lo: f64, hi: f64) -> Result<ViewState> {
    if !lo.is_finite() || !hi.is_finite() {
        return Err(CctError::InvalidArgument("range bounds must be finite".into()));
    }
    if lo > hi {
        return Err(CctError::InvertedRange { lo, hi });
    }
    set_range(gf, vs, Some((lo, hi)))
}

/// Like [`mass_prune`] but also accepts `None` to restore the default rule.
pub fn set_range(gf: &GraphFrame, vs: &ViewState, range: Option<(f64, f64)>) -> Result<ViewState> {
    let mut out = vs.clone();
    out.range = range;
    out.validate(gf)?;
    let shown = range_visible_mask(gf, &out)?;
    out.collapsed.retain(|id| shown[id.index()]);
    out.selection.retain(|id| shown[id.index()]);
    Ok(out)
}

/// Collapses or expands the subtree at `node`.
///
/// Collapsing fails with `NestedCollapse` when `node` is hidden by the range,
/// lies under a collapsed node, or has a collapsed descendant.
pub fn toggle_collapse(gf: &GraphFrame, vs: &ViewState, node: NodeId) -> Result<ViewState> {
    gf.get(node)?;
    vs.validate(gf)?;
    let mut out = vs.clone();
    if out.collapsed.remove(&node) {
        return Ok(out);
    }
    let shown = range_visible_mask(gf, vs)?;
    let label = || node_path(gf, node).unwrap_or_else(|_| node.to_string());
    if !shown[node.index()] || gf.ancestors(node)?.iter().any(|a| vs.collapsed.contains(a)) {
        return Err(CctError::NestedCollapse(label()));
    }
    if gf.descendants(node)?.iter().any(|d| vs.collapsed.contains(d)) {
        return Err(CctError::NestedCollapse(format!(
            "{} has a collapsed descendant",
            label()
        )));
    }
    out.collapsed.insert(node);
    let hidden: BTreeSet<NodeId> = gf.descendants(node)?;
    out.selection.retain(|id| !hidden.contains(id));
    Ok(out)
}

/// Placeholder for a hidden subtree.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateNode {
    pub anchor: NodeId,
    /// Mean of each metric over the subtree, anchor included, in metric order.
    pub aggregated: Vec<f64>,
    pub elided_count: usize,
}

impl SurrogateNode {
    pub fn metric(&self, gf: &GraphFrame, name: &str) -> Result<f64> {
        Ok(self.aggregated[gf.metric_index(name)?])
    }
}

pub fn surrogate(gf: &GraphFrame, anchor: NodeId) -> Result<SurrogateNode> {
    gf.get(anchor)?;
    let members = gf.subtree(anchor);
    let n = members.len() as f64;
    let aggregated = (0..gf.metric_names().len())
        .map(|m| {
            let col = gf.metrics().column(m);
            members.iter().map(|id| col[id.index()]).sum::<f64>() / n
        })
        .collect();
    Ok(SurrogateNode {
        anchor,
        aggregated,
        elided_count: members.len(),
    })
}

/// Wire form of a [`ViewState`]; nodes are addressed by path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ViewStateDoc {
    pub version: u32,
    pub primary: String,
    pub secondary: String,
    pub color_map: ColorMap,
    pub inverted: bool,
    pub collapsed: Vec<String>,
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot: Option<f64>,
    #[serde(default)]
    pub radius_scale: RadiusScale,
}

impl ViewStateDoc {
    pub fn from_view(gf: &GraphFrame, vs: &ViewState) -> Result<ViewStateDoc> {
        vs.validate(gf)?;
        Ok(ViewStateDoc {
            version: VIEWSTATE_VERSION,
            primary: vs.primary.clone(),
            secondary: vs.secondary.clone(),
            color_map: vs.color_map,
            inverted: vs.inverted,
            collapsed: vs
                .collapsed
                .iter()
                .map(|&id| node_path(gf, id))
                .collect::<Result<_>>()?,
            range: vs.range.map(|(lo, hi)| [lo, hi]),
            pivot: vs.pivot,
            radius_scale: vs.radius_scale,
        })
    }

    /// Resolves paths against `gf`. Collapses hidden by the range are dropped.
    pub fn to_view(&self, gf: &GraphFrame) -> Result<ViewState> {
        if self.version != VIEWSTATE_VERSION {
            return Err(CctError::Schema(format!(
                "unsupported view state version {}",
                self.version
            )));
        }
        let mut vs = ViewState::with_metrics(gf, &self.primary, &self.secondary)?;
        vs.color_map = self.color_map;
        vs.inverted = self.inverted;
        vs.pivot = self.pivot;
        vs.radius_scale = self.radius_scale;
        for p in &self.collapsed {
            let id = resolve_path(gf, p).map_err(|_| CctError::StaleView(format!("no node at `{p}`")))?;
            vs.collapsed.insert(id);
        }
        if let Some([lo, hi]) = self.range {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(CctError::InvalidArgument("range bounds must be finite".into()));
            }
        }
        set_range(gf, &vs, self.range.map(|[lo, hi]| (lo, hi)))
    }
}
