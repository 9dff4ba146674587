//! Stable textual node addresses.
//!
//! A node path is the `/`-joined list of frame names from the root. When a
//! parent has several children with the same name, the k-th duplicate
//! (k >= 1) carries a `#k` suffix. `%`, `/` and `#` inside names are
//! percent-escaped. Paths survive reloads of the same input, unlike ids.

use crate::error::{CctError, Result};
use crate::model::{GraphFrame, NodeId};

fn escape(name: &str, out: &mut String) {
    for ch in name.chars() {
        match ch {
            '%' => out.push_str("%25"),
            '/' => out.push_str("%2F"),
            '#' => out.push_str("%23"),
            c => out.push(c),
        }
    }
}

fn unescape(seg: &str) -> Option<String> {
    let mut out = String::with_capacity(seg.len());
    let mut chars = seg.chars();
    while let Some(c) = chars.next() {
        if c == '%' {
            let hex: String = chars.by_ref().take(2).collect();
            match hex.to_ascii_uppercase().as_str() {
                "25" => out.push('%'),
                "2F" => out.push('/'),
                "23" => out.push('#'),
                _ => return None,
            }
        } else {
            out.push(c);
        }
    }
    Some(out)
}

fn siblings(gf: &GraphFrame, id: NodeId) -> &[NodeId] {
    match gf.node(id).and_then(|n| n.parent) {
        Some(p) => gf.children(p),
        None => gf.roots(),
    }
}

/// Number of earlier siblings of `id` that share its name.
pub fn name_ordinal(gf: &GraphFrame, id: NodeId) -> usize {
    let Some(node) = gf.node(id) else { return 0 };
    siblings(gf, id)
        .iter()
        .take_while(|&&s| s != id)
        .filter(|&&s| gf.node(s).is_some_and(|n| n.frame.name == node.frame.name))
        .count()
}

/// True when some sibling of `id` has the same frame name.
pub fn has_namesake(gf: &GraphFrame, id: NodeId) -> bool {
    let Some(node) = gf.node(id) else { return false };
    siblings(gf, id)
        .iter()
        .any(|&s| s != id && gf.node(s).is_some_and(|n| n.frame.name == node.frame.name))
}

pub fn node_path(gf: &GraphFrame, id: NodeId) -> Result<String> {
    let mut out = String::new();
    for (i, n) in gf.path_to_root(id)?.into_iter().enumerate() {
        if i > 0 {
            out.push('/');
        }
        escape(&gf.get(n)?.frame.name, &mut out);
        let k = name_ordinal(gf, n);
        if k > 0 {
            out.push('#');
            out.push_str(&k.to_string());
        }
    }
    Ok(out)
}

pub fn resolve_path(gf: &GraphFrame, path: &str) -> Result<NodeId> {
    let unknown = || CctError::UnknownPath(path.to_string());
    let mut candidates = gf.roots();
    let mut found = None;
    for seg in path.split('/') {
        let (name, ordinal) = match seg.rsplit_once('#') {
            Some((name, k)) => (name, k.parse::<usize>().map_err(|_| unknown())?),
            None => (seg, 0),
        };
        let name = unescape(name).ok_or_else(unknown)?;
        let id = candidates
            .iter()
            .copied()
            .filter(|&c| gf.node(c).is_some_and(|n| n.frame.name == name))
            .nth(ordinal)
            .ok_or_else(unknown)?;
        found = Some(id);
        candidates = gf.children(id);
    }
    found.ok_or_else(unknown)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build, PathRecord, TIME};

    #[test]
    fn round_trip_with_duplicates_and_escapes() {
        let gf = {
            let mut b = crate::model::GraphFrameBuilder::new([TIME]).unwrap();
            let root = b.push_node(None, crate::Frame::new("main"), &[]).unwrap();
            b.push_node(Some(root), crate::Frame::new("a/b#c%"), &[]).unwrap();
            b.push_node(Some(root), crate::Frame::new("dup"), &[]).unwrap();
            b.push_node(Some(root), crate::Frame::new("dup"), &[]).unwrap();
            b.push_node(None, crate::Frame::new("main"), &[]).unwrap();
            b.finish().unwrap()
        };
        let paths: Vec<String> = gf.preorder().iter().map(|&i| node_path(&gf, i).unwrap()).collect();
        assert_eq!(paths, ["main", "main/a%2Fb%23c%25", "main/dup", "main/dup#1", "main#1"]);
        for id in gf.node_ids() {
            assert_eq!(resolve_path(&gf, &node_path(&gf, id).unwrap()).unwrap(), id);
        }
    }

    #[test]
    fn unknown_paths() {
        let gf = build(&[PathRecord::from_names("main/foo", &[(TIME, 1.0)])]).unwrap();
        for p in ["", "main/bar", "main/foo#1", "main/foo#x", "main/%zz"] {
            assert!(matches!(resolve_path(&gf, p), Err(CctError::UnknownPath(_))), "{p}");
        }
    }
}
