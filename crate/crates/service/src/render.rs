//! Indented terminal rendering of a tree.

use std::collections::HashMap;
use std::fmt::Write;

use cct_core::layout::{layout, LayoutResult};
use cct_core::prune::{set_range, ViewState};
use cct_core::{GraphFrame, NodeId, Result};

/// xterm-256 colors matching the diverging and single-hue palettes.
const DIVERGING_ANSI: [u8; 6] = [25, 74, 153, 224, 209, 124];
const SINGLE_HUE_ANSI: [u8; 6] = [255, 189, 146, 140, 97, 54];

#[derive(Clone, Copy, Debug, Default)]
pub struct RenderOptions {
    pub color: bool,
}

/// A view that shows every node: no collapses and a range covering the
/// whole primary column.
pub fn full_view(gf: &GraphFrame, vs: &ViewState) -> Result<ViewState> {
    let col = gf.column(&vs.primary)?;
    let (lo, hi) = gf
        .node_ids()
        .map(|id| col[id.index()])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let mut fresh = ViewState::with_metrics(gf, &vs.primary, &vs.secondary)?;
    fresh.color_map = vs.color_map;
    fresh.inverted = vs.inverted;
    fresh.pivot = vs.pivot;
    set_range(gf, &fresh, Some((lo, hi)))
}

/// One line per visible node: `<guides><value> <name>`. A collapsed anchor
/// is followed by `[+k]` for its k hidden descendants; a subtree hidden by the
/// range is drawn as its root followed by `[pruned k]`.
pub fn render(gf: &GraphFrame, vs: &ViewState, opts: RenderOptions) -> Result<String> {
    let lr = layout(gf, vs)?;
    Ok(render_layout(gf, vs, &lr, opts))
}

fn render_layout(gf: &GraphFrame, vs: &ViewState, lr: &LayoutResult, opts: RenderOptions) -> String {
    let mut parent: HashMap<NodeId, NodeId> = HashMap::new();
    let mut last_child: HashMap<NodeId, NodeId> = HashMap::new();
    for &(p, c) in &lr.edges {
        parent.insert(c, p);
        last_child.insert(p, c);
    }
    let is_last = |id: NodeId| parent.get(&id).is_some_and(|p| last_child[p] == id);
    let palette = match vs.color_map {
        cct_core::prune::ColorMap::Diverging => DIVERGING_ANSI,
        cct_core::prune::ColorMap::SingleHue => SINGLE_HUE_ANSI,
    };
    let col = gf.column(&vs.primary).expect("layout validated the metric");

    let mut out = String::new();
    for n in &lr.nodes {
        let mut guides = Vec::new();
        let mut cur = n.id;
        let mut own = true;
        while let Some(&p) = parent.get(&cur) {
            guides.push(match (own, is_last(cur)) {
                (true, true) => "└ ",
                (true, false) => "├ ",
                (false, true) => "  ",
                (false, false) => "│ ",
            });
            own = false;
            cur = p;
        }
        for g in guides.iter().rev() {
            out.push_str(g);
        }
        let value = format!("{:.3}", col[n.id.index()]);
        if opts.color {
            let _ = write!(out, "\x1b[38;5;{}m{value}\x1b[0m", palette[n.color_index]);
        } else {
            out.push_str(&value);
        }
        out.push(' ');
        out.push_str(&n.name);
        if n.is_surrogate {
            if vs.collapsed().contains(&n.id) {
                let _ = write!(out, " [+{}]", n.elided_count - 1);
            } else {
                let _ = write!(out, " [pruned {}]", n.elided_count);
            }
        }
        out.push('\n');
    }
    out
}
