use std::collections::BTreeSet;

use crate::error::{CctError, Result};
use crate::model::{GraphFrame, NodeId};

use super::{CmpOp, NameRegex, PathPattern, Predicate, Quantifier, Query};

enum Resolved<'a> {
    Regex(&'a NameRegex),
    NameEq(&'a str),
    Metric(&'a [f64], CmpOp, f64),
    Depth(CmpOp, i64),
    ChildIndex(CmpOp, i64),
    Leaf(bool),
}

struct Ctx<'a> {
    gf: &'a GraphFrame,
    child_index: Vec<usize>,
}

impl<'a> Ctx<'a> {
    fn new(gf: &'a GraphFrame) -> Self {
        let mut child_index = vec![0; gf.capacity()];
        for (i, r) in gf.roots().iter().enumerate() {
            child_index[r.index()] = i;
        }
        for n in gf.nodes() {
            for (i, c) in n.children.iter().enumerate() {
                child_index[c.index()] = i;
            }
        }
        Ctx { gf, child_index }
    }

    fn resolve<'q>(&self, p: &'q Predicate) -> Result<Resolved<'q>>
    where
        'a: 'q,
    {
        Ok(match p {
            Predicate::NameRegex(r) => Resolved::Regex(r),
            Predicate::NameEq(s) => Resolved::NameEq(s),
            Predicate::Metric { metric, op, value } => {
                let col = self
                    .gf
                    .column(metric)
                    .map_err(|_| CctError::UnknownMetric(metric.clone()))?;
                Resolved::Metric(col, *op, *value)
            }
            Predicate::Depth { op, value } => Resolved::Depth(*op, *value),
            Predicate::ChildIndex { op, value } => Resolved::ChildIndex(*op, *value),
            Predicate::Leaf(b) => Resolved::Leaf(*b),
        })
    }

    fn holds(&self, p: &Resolved<'_>, id: NodeId) -> bool {
        let node = self.gf.node(id).expect("live node");
        match p {
            Resolved::Regex(r) => r.is_match(&node.frame.name),
            Resolved::NameEq(s) => node.frame.name == *s,
            Resolved::Metric(col, op, v) => op.eval(col[id.index()], *v),
            Resolved::Depth(op, v) => op.eval(node.depth as i64, *v),
            Resolved::ChildIndex(op, v) => op.eval(self.child_index[id.index()] as i64, *v),
            Resolved::Leaf(b) => node.children.is_empty() == *b,
        }
    }

    fn pattern(&self, pattern: &PathPattern) -> Result<Vec<bool>> {
        // Expand PLUS into ONE followed by STAR so every element either
        // consumes exactly one node or loops.
        let mut elems: Vec<(Vec<Resolved<'_>>, bool)> = Vec::new();
        for step in pattern.steps() {
            let preds = || {
                step.predicates
                    .iter()
                    .map(|p| self.resolve(p))
                    .collect::<Result<Vec<_>>>()
            };
            match step.quantifier {
                Quantifier::One => elems.push((preds()?, false)),
                Quantifier::Star => elems.push((preds()?, true)),
                Quantifier::Plus => {
                    elems.push((preds()?, false));
                    elems.push((preds()?, true));
                }
            }
        }
        let m = elems.len();
        let close = |s: &mut [bool]| {
            for i in 0..m {
                if s[i] && elems[i].1 {
                    s[i + 1] = true;
                }
            }
        };
        let mut start = vec![false; m + 1];
        start[0] = true;
        close(&mut start);

        let mut accepted = vec![false; self.gf.capacity()];
        let mut arena: Vec<Vec<bool>> = vec![start];
        let mut stack: Vec<(NodeId, usize)> = self.gf.roots().iter().rev().map(|&r| (r, 0)).collect();
        while let Some((id, si)) = stack.pop() {
            let mut next = vec![false; m + 1];
            for i in 0..m {
                if arena[si][i] && elems[i].0.iter().all(|p| self.holds(p, id)) {
                    next[if elems[i].1 { i } else { i + 1 }] = true;
                }
            }
            close(&mut next);
            if next[m] {
                accepted[id.index()] = true;
            }
            if next[..m].iter().any(|&b| b) {
                let ni = arena.len();
                arena.push(next);
                stack.extend(self.gf.children(id).iter().rev().map(|&c| (c, ni)));
            }
        }
        Ok(self.close_over_ancestors(accepted))
    }

    fn close_over_ancestors(&self, mut mask: Vec<bool>) -> Vec<bool> {
        for id in self.gf.preorder().into_iter().rev() {
            if mask[id.index()] {
                if let Some(p) = self.gf.node(id).and_then(|n| n.parent) {
                    mask[p.index()] = true;
                }
            }
        }
        mask
    }

    fn query(&self, q: &Query) -> Result<Vec<bool>> {
        Ok(match q {
            Query::Pattern(p) => self.pattern(p)?,
            Query::And(a, b) => {
                let (a, b) = (self.query(a)?, self.query(b)?);
                a.iter().zip(&b).map(|(x, y)| *x && *y).collect()
            }
            Query::Or(a, b) => {
                let (a, b) = (self.query(a)?, self.query(b)?);
                a.iter().zip(&b).map(|(x, y)| *x || *y).collect()
            }
            Query::Not(a) => {
                let a = self.query(a)?;
                let mut out = vec![false; a.len()];
                for id in self.gf.node_ids() {
                    out[id.index()] = !a[id.index()];
                }
                out
            }
        })
    }
}

/// Selection as a mask over node slots.
pub fn select_mask(gf: &GraphFrame, q: &Query) -> Result<Vec<bool>> {
    Ctx::new(gf).query(q)
}

pub fn select(gf: &GraphFrame, q: &Query) -> Result<BTreeSet<NodeId>> {
    let mask = select_mask(gf, q)?;
    Ok(gf.node_ids().filter(|id| mask[id.index()]).collect())
}

/// Prunes `gf` to the ancestor closure of the selection; roots are kept.
pub fn apply(gf: &GraphFrame, q: &Query) -> Result<GraphFrame> {
    let mask = select_mask(gf, q)?;
    Ok(crate::ops::filter_prune(gf, |n| mask[n.id().index()]))
}
