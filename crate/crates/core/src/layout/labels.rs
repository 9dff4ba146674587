//! Label overlap removal.
//!
//! Labels are sorted by y and swept once; each live label is compared with
//! the following labels that start within one box height. When two boxes
//! overlap, the label of the shallower node goes; at equal depth the smaller
//! primary metric goes; after that the later label in sort order goes.
//! A final sweep restores any removed label that no longer overlaps a kept
//! one, which happens when its remover was itself removed later.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::model::NodeId;

#[derive(Clone, Debug, PartialEq)]
pub struct LabelCandidate {
    pub id: NodeId,
    /// Vertical center of the text box.
    pub y: f64,
    pub text: String,
    pub box_height: f64,
    pub primary: f64,
    pub depth: usize,
}

/// Boxes are vertical intervals centered on `y`; touching boxes do not overlap.
pub fn overlaps(a: &LabelCandidate, b: &LabelCandidate) -> bool {
    (a.y - b.y).abs() < (a.box_height + b.box_height) / 2.0
}

/// True when `a` should lose its label to `b`; `a` precedes `b` in sort order.
fn weaker(a: &LabelCandidate, b: &LabelCandidate) -> bool {
    match a.depth.cmp(&b.depth) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.primary < b.primary,
    }
}

/// Ids of the labels to keep.
pub fn thin_labels(candidates: &[LabelCandidate]) -> BTreeSet<NodeId> {
    let n = candidates.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| candidates[a].y.total_cmp(&candidates[b].y).then(a.cmp(&b)));
    let c: Vec<&LabelCandidate> = order.iter().map(|&i| &candidates[i]).collect();
    let window = c.iter().map(|l| l.box_height).fold(0.0, f64::max);

    let mut alive = vec![true; n];
    for a in 0..n {
        if !alive[a] {
            continue;
        }
        for b in a + 1..n {
            if c[b].y - c[a].y >= window {
                break;
            }
            if !alive[b] || !overlaps(c[a], c[b]) {
                continue;
            }
            if weaker(c[a], c[b]) {
                alive[a] = false;
                break;
            }
            alive[b] = false;
        }
    }

    for r in 0..n {
        if alive[r] {
            continue;
        }
        let below = (r + 1..n)
            .take_while(|&j| c[j].y - c[r].y < window)
            .any(|j| alive[j] && overlaps(c[r], c[j]));
        let above = (0..r)
            .rev()
            .take_while(|&j| c[r].y - c[j].y < window)
            .any(|j| alive[j] && overlaps(c[r], c[j]));
        if !below && !above {
            alive[r] = true;
        }
    }

    c.iter().zip(&alive).filter(|(_, &a)| a).map(|(l, _)| l.id).collect()
}
