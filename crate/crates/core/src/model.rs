//! Calling context trees with a column-oriented metric table.
//!
//! A [`GraphFrame`] is a forest of [`CctNode`]s addressed by dense [`NodeId`]
//! handles plus one metric column per metric name. Node slots are never
//! reused: transformations that drop nodes leave holes so that ids stay valid
//! across derived frames.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CctError, Result};

/// Exclusive time metric.
pub const TIME: &str = "time";
/// Inclusive time metric, derived from [`TIME`] by [`GraphFrame::finalize_inclusive`].
pub const TIME_INC: &str = "time (inc)";

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(u32);

impl NodeId {
    pub fn from_index(index: usize) -> Self {
        NodeId(u32::try_from(index).expect("node index exceeds u32"))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Identity of a code region.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Frame {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
}

impl Frame {
    pub fn new(name: impl Into<String>) -> Self {
        Frame {
            name: name.into(),
            file: None,
            line: None,
        }
    }

    pub fn with_source(mut self, file: impl Into<String>, line: Option<u32>) -> Self {
        self.file = Some(file.into());
        self.line = line;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(CctError::InvalidFrame("frame name is empty".into()));
        }
        Ok(())
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if let Some(file) = &self.file {
            write!(f, "@{file}")?;
            if let Some(line) = self.line {
                write!(f, ":{line}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CctNode {
    pub id: NodeId,
    pub frame: Frame,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub depth: usize,
}

/// Column-oriented metric storage. Column `m` holds one value per node slot.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MetricTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    units: HashMap<String, String>,
}

impl MetricTable {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn unit(&self, name: &str) -> Option<&str> {
        self.units.get(name).map(String::as_str)
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }
}

/// A forest of calling context trees plus a per-node metric table.
///
/// Immutable once built; every transformation returns a new frame.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphFrame {
    roots: Vec<NodeId>,
    nodes: Vec<Option<CctNode>>,
    metrics: MetricTable,
    len: usize,
}

impl GraphFrame {
    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of node slots, including holes left by pruning.
    pub fn capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    pub fn node(&self, id: NodeId) -> Option<&CctNode> {
        self.nodes.get(id.index()).and_then(Option::as_ref)
    }

    pub fn get(&self, id: NodeId) -> Result<&CctNode> {
        self.node(id).ok_or(CctError::UnknownNode(id))
    }

    /// Live node ids in ascending id order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().flatten().map(|n| n.id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CctNode> + '_ {
        self.nodes.iter().flatten()
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        self.node(id).map(|n| n.children.as_slice()).unwrap_or(&[])
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.children(id).is_empty()
    }

    /// Position of `id` among its parent's children, or among the roots.
    pub fn child_index(&self, id: NodeId) -> usize {
        let siblings = match self.node(id).and_then(|n| n.parent) {
            Some(p) => self.children(p),
            None => &self.roots,
        };
        siblings.iter().position(|&s| s == id).unwrap_or(0)
    }

    /// Node ids in depth-first preorder, roots and children in stored order.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.len);
        let mut stack: Vec<NodeId> = self.roots.iter().rev().copied().collect();
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.children(id).iter().rev().copied());
        }
        out
    }

    /// `id` and all of its descendants in preorder.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children(n).iter().rev().copied());
        }
        out
    }

    /// The root of the tree containing `id`.
    pub fn root_of(&self, id: NodeId) -> Result<NodeId> {
        let mut cur = self.get(id)?;
        while let Some(p) = cur.parent {
            cur = self.get(p)?;
        }
        Ok(cur.id)
    }

    /// `[root, ..., id]`.
    pub fn path_to_root(&self, id: NodeId) -> Result<Vec<NodeId>> {
        let mut path = vec![id];
        let mut cur = self.get(id)?;
        while let Some(p) = cur.parent {
            path.push(p);
            cur = self.get(p)?;
        }
        path.reverse();
        Ok(path)
    }

    /// Proper ancestors of `id`.
    pub fn ancestors(&self, id: NodeId) -> Result<BTreeSet<NodeId>> {
        let mut path = self.path_to_root(id)?;
        path.pop();
        Ok(path.into_iter().collect())
    }

    /// All nodes below `id`, excluding `id`.
    pub fn descendants(&self, id: NodeId) -> Result<BTreeSet<NodeId>> {
        self.get(id)?;
        Ok(self.subtree(id).into_iter().skip(1).collect())
    }

    /// Frame names from the root down to `id`.
    pub fn name_path(&self, id: NodeId) -> Result<Vec<&str>> {
        Ok(self
            .path_to_root(id)?
            .into_iter()
            .map(|n| self.nodes[n.index()].as_ref().unwrap().frame.name.as_str())
            .collect())
    }

    pub fn metrics(&self) -> &MetricTable {
        &self.metrics
    }

    pub fn metric_names(&self) -> &[String] {
        &self.metrics.names
    }

    pub fn has_metric(&self, name: &str) -> bool {
        self.metrics.index_of(name).is_some()
    }

    pub fn metric_index(&self, name: &str) -> Result<usize> {
        self.metrics
            .index_of(name)
            .ok_or_else(|| CctError::MissingMetric(name.to_string()))
    }

    /// The full column for `name`, indexed by [`NodeId::index`]. Slots of
    /// pruned nodes hold stale values.
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        Ok(self.metrics.column(self.metric_index(name)?))
    }

    pub fn metric(&self, id: NodeId, name: &str) -> Result<f64> {
        self.get(id)?;
        Ok(self.column(name)?[id.index()])
    }

    /// All metric values of one node, in metric-name order.
    pub fn row(&self, id: NodeId) -> Result<Vec<(&str, f64)>> {
        self.get(id)?;
        Ok(self
            .metrics
            .names
            .iter()
            .zip(&self.metrics.columns)
            .map(|(n, c)| (n.as_str(), c[id.index()]))
            .collect())
    }

    pub fn set_unit(&mut self, metric: &str, unit: impl Into<String>) -> Result<()> {
        self.metric_index(metric)?;
        self.metrics.units.insert(metric.to_string(), unit.into());
        Ok(())
    }

    /// Returns a copy with column `name` set to `values[id.index()]`.
    ///
    /// `values` must cover every slot. Fails with `NameCollision` when the
    /// column exists and `overwrite` is false.
    pub fn with_metric(&self, name: &str, values: Vec<f64>, overwrite: bool) -> Result<GraphFrame> {
        if values.len() != self.nodes.len() {
            return Err(CctError::InconsistentMetrics(format!(
                "column `{name}` has {} values for {} slots",
                values.len(),
                self.nodes.len()
            )));
        }
        for id in self.node_ids() {
            if !values[id.index()].is_finite() {
                return Err(CctError::NonFiniteMetric {
                    metric: name.to_string(),
                    node: id.to_string(),
                });
            }
        }
        let mut out = self.clone();
        match out.metrics.index_of(name) {
            Some(_) if !overwrite => return Err(CctError::NameCollision(name.to_string())),
            Some(i) => out.metrics.columns[i] = values,
            None => {
                out.metrics.names.push(name.to_string());
                out.metrics.columns.push(values);
            }
        }
        Ok(out)
    }

    /// Adds or overwrites [`TIME_INC`]: `inc(n) = excl(n) + sum of inc(children)`.
    pub fn finalize_inclusive(&self) -> Result<GraphFrame> {
        let excl = self.column(TIME)?;
        let mut inc = vec![0.0; self.nodes.len()];
        for id in self.preorder().into_iter().rev() {
            let i = id.index();
            inc[i] = excl[i] + self.children(id).iter().map(|c| inc[c.index()]).sum::<f64>();
        }
        self.with_metric(TIME_INC, inc, true)
    }

    /// Keeps exactly the nodes in `keep`, which must be ancestor-closed.
    /// Ids and metric columns are carried over unchanged.
    pub(crate) fn restrict(&self, keep: &[bool]) -> GraphFrame {
        let mut nodes: Vec<Option<CctNode>> = Vec::with_capacity(self.nodes.len());
        let mut len = 0;
        for (i, slot) in self.nodes.iter().enumerate() {
            match slot {
                Some(n) if keep[i] => {
                    debug_assert!(n.parent.is_none_or(|p| keep[p.index()]));
                    let mut n = n.clone();
                    n.children.retain(|c| keep[c.index()]);
                    nodes.push(Some(n));
                    len += 1;
                }
                _ => nodes.push(None),
            }
        }
        GraphFrame {
            roots: self.roots.iter().copied().filter(|r| keep[r.index()]).collect(),
            nodes,
            metrics: self.metrics.clone(),
            len,
        }
    }

    /// Boolean mask over node slots for the given set.
    pub fn mask<'a>(&self, ids: impl IntoIterator<Item = &'a NodeId>) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        for id in ids {
            if let Some(m) = mask.get_mut(id.index()) {
                *m = true;
            }
        }
        mask
    }

    /// Closes `seed` over ancestors and adds every root.
    pub fn ancestor_closure_mask(&self, seed: &[bool]) -> Vec<bool> {
        let mut keep = vec![false; self.nodes.len()];
        for r in &self.roots {
            keep[r.index()] = true;
        }
        for id in self.node_ids() {
            if !seed.get(id.index()).copied().unwrap_or(false) {
                continue;
            }
            let mut cur = Some(id);
            while let Some(c) = cur {
                if keep[c.index()] && c != id {
                    break;
                }
                keep[c.index()] = true;
                cur = self.nodes[c.index()].as_ref().and_then(|n| n.parent);
            }
        }
        keep
    }
}

/// A call path and the metric values recorded for it.
#[derive(Clone, Debug, PartialEq)]
pub struct PathRecord {
    pub path: Vec<Frame>,
    pub metrics: Vec<(String, f64)>,
}

impl PathRecord {
    pub fn new(path: Vec<Frame>, metrics: Vec<(String, f64)>) -> Self {
        PathRecord { path, metrics }
    }

    /// Record whose path is given as `/`-separated frame names.
    pub fn from_names(path: &str, metrics: &[(&str, f64)]) -> Self {
        PathRecord {
            path: path.split('/').map(Frame::new).collect(),
            metrics: metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// Incremental construction of a [`GraphFrame`].
///
/// Path insertion merges a path element into an existing node iff the frames
/// are equal and the parent is the same. Values of duplicate full paths add
/// up; nodes created only as prefixes carry 0.0 for every metric.
#[derive(Debug)]
pub struct GraphFrameBuilder {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    nodes: Vec<Option<CctNode>>,
    roots: Vec<NodeId>,
    index: HashMap<(Option<NodeId>, Frame), NodeId>,
}

impl GraphFrameBuilder {
    pub fn new<S: Into<String>>(metric_names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = metric_names.into_iter().map(Into::into).collect();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(CctError::InconsistentMetrics("empty metric name".into()));
            }
            if names[..i].contains(n) {
                return Err(CctError::InconsistentMetrics(format!("metric `{n}` declared twice")));
            }
        }
        Ok(GraphFrameBuilder {
            columns: vec![Vec::new(); names.len()],
            names,
            nodes: Vec::new(),
            roots: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn metric_names(&self) -> &[String] {
        &self.names
    }

    fn values_for(&self, record: &[(String, f64)], node: &str) -> Result<Vec<f64>> {
        let mut values = vec![0.0; self.names.len()];
        let mut seen = vec![false; self.names.len()];
        for (name, v) in record {
            let i = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| CctError::InconsistentMetrics(format!("undeclared metric `{name}`")))?;
            if seen[i] {
                return Err(CctError::InconsistentMetrics(format!("metric `{name}` given twice")));
            }
            if !v.is_finite() {
                return Err(CctError::NonFiniteMetric {
                    metric: name.clone(),
                    node: node.to_string(),
                });
            }
            seen[i] = true;
            values[i] = *v;
        }
        Ok(values)
    }

    fn alloc(&mut self, parent: Option<NodeId>, frame: Frame) -> NodeId {
        let id = NodeId::from_index(self.nodes.len());
        let depth = match parent {
            Some(p) => {
                let pn = self.nodes[p.index()].as_mut().unwrap();
                pn.children.push(id);
                pn.depth + 1
            }
            None => {
                self.roots.push(id);
                0
            }
        };
        self.nodes.push(Some(CctNode {
            id,
            frame,
            parent,
            children: Vec::new(),
            depth,
        }));
        for c in &mut self.columns {
            c.push(0.0);
        }
        id
    }

    /// Merges `path` into the tree and adds `record` to its last node.
    pub fn add_path(&mut self, path: &[Frame], record: &[(String, f64)]) -> Result<NodeId> {
        let Some(last) = path.last() else {
            return Err(CctError::InvalidFrame("empty call path".into()));
        };
        for f in path {
            f.validate()?;
        }
        let values = self.values_for(record, &last.name)?;
        let mut parent = None;
        for frame in path {
            let key = (parent, frame.clone());
            let id = match self.index.get(&key) {
                Some(&id) => id,
                None => {
                    let id = self.alloc(parent, frame.clone());
                    self.index.insert(key, id);
                    id
                }
            };
            parent = Some(id);
        }
        let id = parent.unwrap();
        for (c, v) in self.columns.iter_mut().zip(values) {
            c[id.index()] += v;
        }
        Ok(id)
    }

    /// Appends a new node without merging it into an equal sibling.
    pub fn push_node(&mut self, parent: Option<NodeId>, frame: Frame, record: &[(String, f64)]) -> Result<NodeId> {
        frame.validate()?;
        if let Some(p) = parent {
            if self.nodes.get(p.index()).and_then(Option::as_ref).is_none() {
                return Err(CctError::UnknownNode(p));
            }
        }
        let values = self.values_for(record, &frame.name)?;
        let id = self.alloc(parent, frame.clone());
        self.index.entry((parent, frame)).or_insert(id);
        for (c, v) in self.columns.iter_mut().zip(values) {
            c[id.index()] = v;
        }
        Ok(id)
    }

    pub fn finish(self) -> Result<GraphFrame> {
        if self.roots.is_empty() {
            return Err(CctError::EmptyInput);
        }
        let len = self.nodes.len();
        Ok(GraphFrame {
            roots: self.roots,
            nodes: self.nodes,
            metrics: MetricTable {
                names: self.names,
                columns: self.columns,
                units: HashMap::new(),
            },
            len,
        })
    }
}

/// Builds a frame from call-path records. All records must carry the same
/// metric names; the first record fixes the column order.
pub fn build(records: &[PathRecord]) -> Result<GraphFrame> {
    let first = records.first().ok_or(CctError::EmptyInput)?;
    let names: Vec<&str> = first.metrics.iter().map(|(k, _)| k.as_str()).collect();
    let mut builder = GraphFrameBuilder::new(names.iter().copied())?;
    let mut expected: Vec<&str> = names.clone();
    expected.sort_unstable();
    for (i, r) in records.iter().enumerate() {
        let mut keys: Vec<&str> = r.metrics.iter().map(|(k, _)| k.as_str()).collect();
        keys.sort_unstable();
        if keys != expected {
            return Err(CctError::InconsistentMetrics(format!(
                "record {i} has metrics {keys:?}, expected {expected:?}"
            )));
        }
        builder.add_path(&r.path, &r.metrics)?;
    }
    builder.finish()
}
