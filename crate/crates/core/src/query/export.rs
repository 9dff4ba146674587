use crate::error::Result;
use crate::model::{GraphFrame, NodeId};
use crate::path::has_namesake;
use crate::prune::{visible_mask, ViewState};

use super::{CmpOp, PathPattern, Predicate, Quantifier, Query, Step};

/// Steps matching exactly the root-to-`id` path. Siblings sharing a name
/// are told apart by `child_index`.
fn exact_steps(gf: &GraphFrame, id: NodeId) -> Result<Vec<Step>> {
    gf.path_to_root(id)?
        .into_iter()
        .map(|n| {
            let mut preds = vec![Predicate::NameEq(gf.get(n)?.frame.name.clone())];
            if has_namesake(gf, n) {
                preds.push(Predicate::ChildIndex {
                    op: CmpOp::Eq,
                    value: gf.child_index(n) as i64,
                });
            }
            Ok(Step::one(preds))
        })
        .collect()
}

/// Builds a query selecting exactly the nodes visible under `vs`.
///
/// With `B` the hidden nodes whose parent is visible, the visible set is
/// everything outside the subtrees rooted in `B`. A pattern always selects
/// the path leading to its matches, so the query removes `path(b)/*` for
/// every `b` and adds back the paths to the parents of `B`.
pub fn from_view(gf: &GraphFrame, vs: &ViewState) -> Result<Query> {
    let shown = visible_mask(gf, vs)?;
    let mut hidden_tops = Vec::new();
    let mut parents: Vec<NodeId> = Vec::new();
    let mut seen = vec![false; gf.capacity()];
    for id in gf.preorder() {
        let node = gf.get(id)?;
        if let Some(p) = node.parent {
            if !shown[id.index()] && shown[p.index()] {
                hidden_tops.push(id);
                if !seen[p.index()] {
                    seen[p.index()] = true;
                    parents.push(p);
                }
            }
        }
    }
    if hidden_tops.is_empty() {
        return Ok(Query::all());
    }
    let subtrees = hidden_tops
        .iter()
        .map(|&b| {
            let mut steps = exact_steps(gf, b)?;
            steps.push(Step::any(Quantifier::Star));
            Ok(Query::Pattern(PathPattern::new(steps)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let paths = parents
        .iter()
        .map(|&p| Ok(Query::Pattern(PathPattern::new(exact_steps(gf, p)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let removed = Query::any_of(subtrees).expect("non-empty").not();
    Ok(removed.or(Query::any_of(paths).expect("non-empty")))
}
