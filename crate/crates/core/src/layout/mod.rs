//! Render model for the visible tree: node positions, color and size
//! encodings, surrogate markers for hidden subtrees and thinned labels.
//!
//! The root sits on the left and depth grows to the right (`x = depth * dx`).
//! Separate trees are stacked vertically without overlapping.

mod encode;
mod labels;
mod tidy;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::model::{GraphFrame, NodeId};
use crate::path::node_path;
use crate::prune::{elided_roots, surrogate, visible_mask, SurrogateNode, ViewState};

pub use encode::{EncodingScales, COLOR_STEPS, DIVERGING_PALETTE, R_MAX, R_MIN, SINGLE_HUE_PALETTE};
pub use labels::{overlaps, thin_labels, LabelCandidate};
pub use tidy::{tidy_positions, Shape};

pub const LAYOUT_VERSION: u32 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LayoutConfig {
    /// Horizontal distance between depth levels.
    pub dx: f64,
    /// Minimum vertical distance between nodes on the same level.
    pub min_sep: f64,
    /// Label box height used by label thinning.
    pub box_height: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            dx: 120.0,
            min_sep: 28.0,
            box_height: 14.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayoutNode {
    pub id: NodeId,
    pub path: String,
    pub name: String,
    pub depth: usize,
    pub x: f64,
    pub y: f64,
    #[serde(rename = "r")]
    pub radius: f64,
    #[serde(rename = "color")]
    pub color_index: usize,
    /// Primary metric value as encoded (subtree mean for surrogates).
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(rename = "surrogate")]
    pub is_surrogate: bool,
    #[serde(rename = "elided")]
    pub elided_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayoutResult {
    pub nodes: Vec<LayoutNode>,
    pub edges: Vec<(NodeId, NodeId)>,
    pub tree_offsets: Vec<f64>,
    pub scales: EncodingScales,
    pub constants: LayoutConfig,
}

impl LayoutResult {
    pub fn node(&self, id: NodeId) -> Option<&LayoutNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("layout serialization")
    }
}

#[derive(Serialize)]
struct Legend<'a> {
    color: &'a [f64],
    size: [f64; 2],
    palette: &'a [&'static str],
    #[serde(rename = "colorMap")]
    color_map: crate::prune::ColorMap,
    inverted: bool,
}

impl Serialize for LayoutResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("LayoutResult", 6)?;
        st.serialize_field("version", &LAYOUT_VERSION)?;
        st.serialize_field("nodes", &self.nodes)?;
        st.serialize_field("edges", &self.edges)?;
        st.serialize_field("treeOffsets", &self.tree_offsets)?;
        st.serialize_field(
            "legend",
            &Legend {
                color: &self.scales.color_edges,
                size: self.scales.size_domain,
                palette: &self.scales.palette,
                color_map: self.scales.color_map,
                inverted: self.scales.inverted,
            },
        )?;
        st.serialize_field("constants", &self.constants)?;
        st.end()
    }
}

/// One drawable item of the visible tree.
struct Item {
    id: NodeId,
    depth: usize,
    surrogate: Option<SurrogateNode>,
    children: Vec<usize>,
}

/// Visible trees in preorder, with hidden subtrees replaced by surrogates.
fn render_trees(gf: &GraphFrame, vs: &ViewState) -> Result<Vec<Vec<Item>>> {
    let shown = visible_mask(gf, vs)?;
    let mut placeholder = vec![false; gf.capacity()];
    for id in elided_roots(gf, vs)? {
        placeholder[id.index()] = true;
    }
    let mut trees = Vec::with_capacity(gf.roots().len());
    for &root in gf.roots() {
        let mut items: Vec<Item> = Vec::new();
        let mut stack: Vec<(NodeId, Option<usize>)> = vec![(root, None)];
        while let Some((id, parent)) = stack.pop() {
            let node = gf.get(id)?;
            let collapsed = vs.collapsed().contains(&id);
            let surrogate = if collapsed || placeholder[id.index()] {
                Some(surrogate(gf, id)?)
            } else {
                None
            };
            let idx = items.len();
            items.push(Item {
                id,
                depth: node.depth,
                surrogate,
                children: Vec::new(),
            });
            if let Some(p) = parent {
                items[p].children.push(idx);
            }
            if collapsed || placeholder[id.index()] {
                continue;
            }
            for &c in node.children.iter().rev() {
                if shown[c.index()] || placeholder[c.index()] {
                    stack.push((c, Some(idx)));
                }
            }
        }
        trees.push(items);
    }
    Ok(trees)
}

fn displayed(gf: &GraphFrame, item: &Item, metric: usize) -> f64 {
    match &item.surrogate {
        Some(s) => s.aggregated[metric],
        None => gf.metrics().column(metric)[item.id.index()],
    }
}

fn fit_scales(gf: &GraphFrame, vs: &ViewState, trees: &[Vec<Item>]) -> Result<EncodingScales> {
    let p = gf.metric_index(&vs.primary)?;
    let s = gf.metric_index(&vs.secondary)?;
    let items = || trees.iter().flatten();
    Ok(EncodingScales::fit(
        items().map(|i| displayed(gf, i, p)),
        items().map(|i| displayed(gf, i, s)),
        vs.color_map,
        vs.inverted,
        vs.pivot,
        vs.radius_scale,
    ))
}

/// Color and size scales for the current view. Surrogates contribute their
/// subtree means.
pub fn encode(gf: &GraphFrame, vs: &ViewState) -> Result<EncodingScales> {
    let trees = render_trees(gf, vs)?;
    fit_scales(gf, vs, &trees)
}

pub fn layout(gf: &GraphFrame, vs: &ViewState) -> Result<LayoutResult> {
    layout_with(gf, vs, LayoutConfig::default())
}

pub fn layout_with(gf: &GraphFrame, vs: &ViewState, config: LayoutConfig) -> Result<LayoutResult> {
    let trees = render_trees(gf, vs)?;
    let scales = fit_scales(gf, vs, &trees)?;
    let p = gf.metric_index(&vs.primary)?;
    let s = gf.metric_index(&vs.secondary)?;

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut tree_offsets = Vec::with_capacity(trees.len());
    let mut candidates = Vec::new();
    let mut bottom: Option<f64> = None;
    for items in &trees {
        let kids: Vec<Vec<usize>> = items.iter().map(|i| i.children.clone()).collect();
        let ys = tidy_positions(&Shape { children: &kids }, config.min_sep);
        let (top, low) = ys
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
        let offset = match bottom {
            None => 0.0,
            Some(prev) => prev + config.min_sep - top,
        };
        bottom = Some(low + offset);
        tree_offsets.push(offset);

        for (item, y) in items.iter().zip(&ys) {
            let node = gf.get(item.id)?;
            let value = displayed(gf, item, p);
            let y = y + offset;
            if item.children.is_empty() {
                candidates.push(LabelCandidate {
                    id: item.id,
                    y,
                    text: node.frame.name.clone(),
                    box_height: config.box_height,
                    primary: value,
                    depth: item.depth,
                });
            }
            for &c in &item.children {
                edges.push((item.id, items[c].id));
            }
            nodes.push(LayoutNode {
                id: item.id,
                path: node_path(gf, item.id)?,
                name: node.frame.name.clone(),
                depth: item.depth,
                x: item.depth as f64 * config.dx,
                y,
                radius: scales.radius(displayed(gf, item, s)),
                color_index: scales.color_index(value),
                value,
                label: None,
                is_surrogate: item.surrogate.is_some(),
                elided_count: item.surrogate.as_ref().map_or(0, |s| s.elided_count),
            });
        }
    }
    let kept = thin_labels(&candidates);
    for n in &mut nodes {
        if kept.contains(&n.id) {
            n.label = Some(n.name.clone());
        }
    }
    Ok(LayoutResult {
        nodes,
        edges,
        tree_offsets,
        scales,
        constants: config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::read_folded;
    use crate::path::resolve_path;
    use crate::prune::{mass_prune, toggle_collapse};

    #[test]
    fn single_node_at_origin() {
        let gf = read_folded("a 1\n").unwrap();
        let l = layout(&gf, &ViewState::new(&gf).unwrap()).unwrap();
        assert_eq!(l.nodes.len(), 1);
        assert_eq!((l.nodes[0].x, l.nodes[0].y), (0.0, 0.0));
        assert_eq!(l.nodes[0].label.as_deref(), Some("a"));
        assert!(l.edges.is_empty());
    }

    #[test]
    fn two_leaves_center_parent() {
        let gf = read_folded("r;a 1\nr;b 2\n").unwrap();
        let l = layout(&gf, &ViewState::new(&gf).unwrap()).unwrap();
        let y = |p| l.node(resolve_path(&gf, p).unwrap()).unwrap().y;
        assert_eq!(y("r"), (y("r/a") + y("r/b")) / 2.0);
        assert_eq!(y("r/b") - y("r/a"), 28.0);
        assert_eq!(l.nodes[1].x, 120.0);
        assert_eq!(l.edges.len(), 2);
    }

    #[test]
    fn collapsed_node_becomes_surrogate_leaf() {
        let gf = read_folded("r;a;x 1\nr;a;y 3\nr;b 2\n").unwrap();
        let a = resolve_path(&gf, "r/a").unwrap();
        let vs = toggle_collapse(&gf, &ViewState::new(&gf).unwrap(), a).unwrap();
        let l = layout(&gf, &vs).unwrap();
        assert_eq!(l.nodes.len(), 3);
        let n = l.node(a).unwrap();
        assert!(n.is_surrogate);
        assert_eq!(n.elided_count, 3);
        // mean of time (inc) over {a: 4, x: 1, y: 3}
        assert_eq!(n.value, 8.0 / 3.0);
    }

    #[test]
    fn range_elided_subtrees_get_markers() {
        let gf = read_folded("r;a 1\nr;b;c 5\n").unwrap();
        let vs = ViewState::with_metrics(&gf, "time", "time").unwrap();
        let vs = mass_prune(&gf, &vs, 4.0, 6.0).unwrap();
        let l = layout(&gf, &vs).unwrap();
        let a = l.node(resolve_path(&gf, "r/a").unwrap()).unwrap();
        assert!(a.is_surrogate);
        assert_eq!(a.elided_count, 1);
        assert_eq!(l.nodes.iter().filter(|n| n.is_surrogate).count(), 1);
    }

    #[test]
    fn trees_stack_without_overlap() {
        let gf = read_folded("r;a 1\nr;b 1\nr;c 1\ns;d 1\ns;e 1\n").unwrap();
        let l = layout(&gf, &ViewState::new(&gf).unwrap()).unwrap();
        let extent = |root: &str| {
            let ys: Vec<f64> = l
                .nodes
                .iter()
                .filter(|n| n.path.starts_with(root))
                .map(|n| n.y)
                .collect();
            (
                ys.iter().cloned().fold(f64::INFINITY, f64::min),
                ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let (_, r_max) = extent("r");
        let (s_min, _) = extent("s");
        assert!(s_min - r_max >= 28.0);
        assert_eq!(l.tree_offsets.len(), 2);
    }

    #[test]
    fn json_shape() {
        let gf = read_folded("a 1\n").unwrap();
        let json = layout(&gf, &ViewState::new(&gf).unwrap()).unwrap().to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["nodes"][0]["path"], "a");
        assert_eq!(v["nodes"][0]["r"], 4.0);
        assert_eq!(v["legend"]["color"].as_array().unwrap().len(), 7);
        assert_eq!(v["constants"]["minSep"], 28.0);
    }
}
