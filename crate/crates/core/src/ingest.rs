//! Profile readers and writers.
//!
//! Two text formats are supported:
//!
//! * **literal**: a JSON array of trees, each node an object
//!   `{"frame": {"name", "file"?, "line"?}, "metrics": {..}, "children": [..]}`.
//!   Every node carries the same metric keys.
//! * **folded**: one call path per line, `frame;frame;...;frame <value>`,
//!   where the value is the exclusive time of the full path. Lines starting
//!   with `#` are comments. A frame token `name@file:line` fills in the
//!   source location.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{CctError, Result};
use crate::model::{Frame, GraphFrame, GraphFrameBuilder, NodeId, TIME, TIME_INC};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Format {
    Literal,
    Folded,
}

impl FromStr for Format {
    type Err = CctError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" | "json" => Ok(Format::Literal),
            "folded" => Ok(Format::Folded),
            other => Err(CctError::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

impl Format {
    /// `[` or `{` as the first byte outside comments and blank lines means literal.
    pub fn detect(text: &str) -> Format {
        let first = text
            .lines()
            .map(str::trim_start)
            .find(|l| !l.is_empty() && !l.starts_with('#'))
            .and_then(|l| l.chars().next());
        match first {
            Some('[') | Some('{') => Format::Literal,
            _ => Format::Folded,
        }
    }
}

/// Reads `text` in the given format, or the detected one when `None`.
pub fn read(text: &str, format: Option<Format>) -> Result<GraphFrame> {
    match format.unwrap_or_else(|| Format::detect(text)) {
        Format::Literal => read_literal(text),
        Format::Folded => read_folded(text),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LiteralNode {
    frame: Frame,
    metrics: BTreeMap<String, f64>,
    #[serde(default)]
    children: Vec<LiteralNode>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LiteralDoc {
    Forest(Vec<LiteralNode>),
    Tree(LiteralNode),
}

fn json_error(e: serde_json::Error) -> CctError {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => CctError::Schema(format!("line {}: {e}", e.line())),
        _ => CctError::Parse {
            line: e.line(),
            reason: e.to_string(),
        },
    }
}

fn parse_literal_doc(text: &str) -> Result<Vec<LiteralNode>> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let trimmed = text.trim_start();
    let doc = if trimmed.starts_with('{') {
        LiteralNode::deserialize(&mut de).map(|n| vec![n])
    } else if trimmed.starts_with('[') {
        Vec::<LiteralNode>::deserialize(&mut de)
    } else {
        LiteralDoc::deserialize(&mut de).map(|d| match d {
            LiteralDoc::Forest(v) => v,
            LiteralDoc::Tree(n) => vec![n],
        })
    }
    .map_err(json_error)?;
    de.end().map_err(json_error)?;
    Ok(doc)
}

/// Parses a literal document. Inclusive time is derived when the document
/// has `time` but not `time (inc)`.
pub fn read_literal(text: &str) -> Result<GraphFrame> {
    let trees = parse_literal_doc(text)?;
    let first = trees.first().ok_or(CctError::EmptyInput)?;
    let names: Vec<String> = first.metrics.keys().cloned().collect();
    let mut builder = GraphFrameBuilder::new(names.iter().cloned())?;

    let mut stack: Vec<(Option<NodeId>, &LiteralNode)> = trees.iter().rev().map(|t| (None, t)).collect();
    while let Some((parent, node)) = stack.pop() {
        if !node.metrics.keys().eq(names.iter()) {
            return Err(CctError::Schema(format!(
                "node `{}` has metrics {:?}, expected {:?}",
                node.frame.name,
                node.metrics.keys().collect::<Vec<_>>(),
                names
            )));
        }
        if node.frame.name.is_empty() {
            return Err(CctError::Schema("frame.name is empty".into()));
        }
        let record: Vec<(String, f64)> = node.metrics.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let id = builder.push_node(parent, node.frame.clone(), &record)?;
        stack.extend(node.children.iter().rev().map(|c| (Some(id), c)));
    }
    let gf = builder.finish()?;
    if gf.has_metric(TIME) && !gf.has_metric(TIME_INC) {
        gf.finalize_inclusive()
    } else {
        Ok(gf)
    }
}

struct LiteralView<'a> {
    gf: &'a GraphFrame,
    id: NodeId,
    metric_order: &'a [(usize, &'a str)],
}

impl Serialize for LiteralView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let node = self.gf.node(self.id).expect("live node");
        let mut map = s.serialize_map(Some(3))?;
        map.serialize_entry("frame", &node.frame)?;
        let metrics: Vec<(&str, f64)> = self
            .metric_order
            .iter()
            .map(|&(i, name)| (name, self.gf.metrics().column(i)[self.id.index()]))
            .collect();
        map.serialize_entry("metrics", &MetricsView(&metrics))?;
        let children: Vec<LiteralView<'_>> = node
            .children
            .iter()
            .map(|&c| LiteralView {
                gf: self.gf,
                id: c,
                metric_order: self.metric_order,
            })
            .collect();
        map.serialize_entry("children", &children)?;
        map.end()
    }
}

struct MetricsView<'a>(&'a [(&'a str, f64)]);

impl Serialize for MetricsView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

struct ForestView<'a>(Vec<LiteralView<'a>>);

impl Serialize for ForestView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for t in &self.0 {
            seq.serialize_element(t)?;
        }
        seq.end()
    }
}

/// Canonical literal serialization: metrics in alphabetical order, children
/// arrays always present, floats in shortest round-trip form.
pub fn write_literal(gf: &GraphFrame) -> String {
    let mut order: Vec<(usize, &str)> = gf
        .metric_names()
        .iter()
        .enumerate()
        .map(|(i, n)| (i, n.as_str()))
        .collect();
    order.sort_by(|a, b| a.1.cmp(b.1));
    let forest = ForestView(
        gf.roots()
            .iter()
            .map(|&r| LiteralView {
                gf,
                id: r,
                metric_order: &order,
            })
            .collect(),
    );
    let mut out = serde_json::to_string(&forest).expect("literal serialization");
    out.push('\n');
    out
}

fn parse_frame_token(tok: &str) -> Frame {
    if let Some((name, rest)) = tok.rsplit_once('@') {
        if let Some((file, digits)) = rest.rsplit_once(':') {
            if !name.is_empty() && !file.is_empty() && digits.bytes().all(|c| c.is_ascii_digit()) {
                if let Ok(line) = digits.parse::<u32>() {
                    return Frame::new(name).with_source(file, Some(line));
                }
            }
        }
    }
    Frame::new(tok)
}

fn parse_folded_line(line: &str, lineno: usize) -> Result<(Vec<Frame>, f64)> {
    let err = |reason: &str| CctError::Parse {
        line: lineno,
        reason: reason.to_string(),
    };
    let (stack, value) = line
        .rsplit_once(|c: char| c.is_whitespace())
        .ok_or_else(|| err("missing value"))?;
    let value: f64 = value.parse().map_err(|_| err(&format!("invalid value `{value}`")))?;
    if !value.is_finite() {
        return Err(err("value is not finite"));
    }
    let stack = stack.trim_end();
    if stack.is_empty() {
        return Err(err("empty call path"));
    }
    let mut frames = Vec::new();
    for (i, tok) in stack.split(';').enumerate() {
        if tok.is_empty() {
            return Err(err(&format!("empty frame at position {}", i + 1)));
        }
        frames.push(parse_frame_token(tok));
    }
    Ok((frames, value))
}

/// Parses folded stacks into a frame with `time` and `time (inc)`.
pub fn read_folded(text: &str) -> Result<GraphFrame> {
    let mut builder = GraphFrameBuilder::new([TIME])?;
    let metric = TIME.to_string();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (frames, value) = parse_folded_line(line, i + 1)?;
        builder.add_path(&frames, &[(metric.clone(), value)])?;
    }
    builder.finish()?.finalize_inclusive()
}

fn frame_token(frame: &Frame) -> Result<String> {
    let bad = |why: &str| CctError::Unrepresentable(format!("frame `{}`: {why}", frame.name));
    let name = &frame.name;
    if name.contains([';', '\n', '\r']) {
        return Err(bad("name contains `;` or a newline"));
    }
    if name.trim() != name {
        return Err(bad("name has surrounding whitespace"));
    }
    match (&frame.file, frame.line) {
        (None, None) => {
            if parse_frame_token(name) != Frame::new(name.as_str()) {
                return Err(bad("name would be read back as name@file:line"));
            }
            Ok(name.clone())
        }
        (Some(file), Some(line)) => {
            if file.is_empty() || file.contains(['@', ';', '\n', '\r']) || file.chars().any(char::is_whitespace) {
                return Err(bad("file name cannot be encoded"));
            }
            Ok(format!("{name}@{file}:{line}"))
        }
        _ => Err(bad("source location needs both file and line")),
    }
}

/// One line per node with nonzero exclusive time, plus one per zero-valued
/// leaf, in preorder.
pub fn write_folded(gf: &GraphFrame) -> Result<String> {
    let excl = gf.column(TIME)?;
    let mut tokens: Vec<String> = vec![String::new(); gf.capacity()];
    let mut out = String::new();
    for id in gf.preorder() {
        let node = gf.get(id)?;
        let tok = frame_token(&node.frame)?;
        tokens[id.index()] = match node.parent {
            Some(p) => format!("{};{tok}", tokens[p.index()]),
            None => tok,
        };
        let v = excl[id.index()];
        if v != 0.0 || node.children.is_empty() {
            writeln!(out, "{} {}", tokens[id.index()], v).unwrap();
        }
    }
    Ok(out)
}
