//! Per-session state: the loaded frame, the current view and the log of
//! commands that produced it.

use std::path::PathBuf;
use std::sync::Arc;

use cct_core::ingest::{read, Format};
use cct_core::layout::{layout, LayoutResult};
use cct_core::prune::{
    histogram_in, set_range, toggle_collapse, ButterflyHistogram, ColorMap, RadiusScale, ViewState, ViewStateDoc,
    DEFAULT_BINS,
};
use cct_core::query::{apply, from_view, parse};
use cct_core::{node_path, resolve_path, CctError, GraphFrame};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{ServiceError, ServiceResult};

/// Where a session's profile came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Source {
    File { path: PathBuf, format: Option<String> },
    Text { text: String, format: Option<String> },
}

fn parse_format(format: &Option<String>) -> ServiceResult<Option<Format>> {
    format
        .as_deref()
        .map(|f| f.parse::<Format>().map_err(ServiceError::from))
        .transpose()
}

impl Source {
    pub fn load(&self) -> ServiceResult<GraphFrame> {
        match self {
            Source::File { path, format } => {
                let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
                Ok(read(&text, parse_format(format)?)?)
            }
            Source::Text { text, format } => Ok(read(text, parse_format(format)?)?),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EncodingUpdate {
    #[serde(default)]
    pub primary: Option<String>,
    #[serde(default)]
    pub secondary: Option<String>,
    #[serde(default)]
    pub color_map: Option<ColorMap>,
    #[serde(default)]
    pub inverted: Option<bool>,
    #[serde(default)]
    pub pivot: Option<f64>,
    #[serde(default)]
    pub radius_scale: Option<RadiusScale>,
}

/// A state-changing interaction, as logged in the session history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "op")]
pub enum Command {
    /// Toggles the collapse at `path`, or sets it when `collapsed` is given.
    Collapse {
        path: String,
        collapsed: Option<bool>,
    },
    /// `None` restores the default rule.
    Range {
        range: Option<(f64, f64)>,
    },
    Encoding(EncodingUpdate),
    ApplyQuery {
        query: String,
    },
    ViewState(ViewStateDoc),
}

pub struct Session {
    pub id: String,
    pub source: Source,
    original: Arc<GraphFrame>,
    gf: Arc<GraphFrame>,
    vs: ViewState,
    history: Vec<Command>,
}

fn primary_extent(gf: &GraphFrame, metric: &str) -> cct_core::Result<(f64, f64)> {
    let col = gf.column(metric)?;
    Ok(gf
        .node_ids()
        .map(|id| col[id.index()])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v))))
}

/// Computes the frame and view that result from `cmd`, without committing.
fn step(gf: &Arc<GraphFrame>, vs: &ViewState, cmd: &Command) -> cct_core::Result<(Arc<GraphFrame>, ViewState)> {
    match cmd {
        Command::Collapse { path, collapsed } => {
            let id = resolve_path(gf, path)?;
            let is_collapsed = vs.collapsed().contains(&id);
            let next = match collapsed {
                Some(want) if *want == is_collapsed => vs.clone(),
                _ => toggle_collapse(gf, vs, id)?,
            };
            Ok((gf.clone(), next))
        }
        Command::Range { range } => {
            if let Some((lo, hi)) = range {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(CctError::InvalidArgument("range bounds must be finite".into()));
                }
                if lo > hi {
                    return Err(CctError::InvertedRange { lo: *lo, hi: *hi });
                }
            }
            Ok((gf.clone(), set_range(gf, vs, *range)?))
        }
        Command::Encoding(u) => {
            let mut next = vs.clone();
            if let Some(p) = &u.primary {
                gf.metric_index(p)?;
                if *p != next.primary {
                    next.primary = p.clone();
                    next = set_range(gf, &next, None)?;
                }
            }
            if let Some(s) = &u.secondary {
                gf.metric_index(s)?;
                next.secondary = s.clone();
            }
            if let Some(c) = u.color_map {
                next.color_map = c;
            }
            if let Some(i) = u.inverted {
                next.inverted = i;
            }
            if let Some(p) = u.pivot {
                if !p.is_finite() {
                    return Err(CctError::InvalidArgument("pivot must be finite".into()));
                }
                next.pivot = Some(p);
            }
            if let Some(r) = u.radius_scale {
                next.radius_scale = r;
            }
            Ok((gf.clone(), next))
        }
        Command::ApplyQuery { query } => {
            let q = parse(query)?;
            let pruned = Arc::new(apply(gf, &q)?);
            let mut next = ViewState::with_metrics(&pruned, &vs.primary, &vs.secondary)?;
            next.color_map = vs.color_map;
            next.inverted = vs.inverted;
            next.pivot = vs.pivot;
            next.radius_scale = vs.radius_scale;
            let full = primary_extent(&pruned, &next.primary)?;
            let next = set_range(&pruned, &next, Some(full))?;
            Ok((pruned, next))
        }
        Command::ViewState(doc) => Ok((gf.clone(), doc.to_view(gf)?)),
    }
}

impl Session {
    pub fn open(id: String, source: Source) -> ServiceResult<Session> {
        let gf = Arc::new(source.load()?);
        let vs = ViewState::new(&gf)?;
        Ok(Session {
            id,
            source,
            original: gf.clone(),
            gf,
            vs,
            history: Vec::new(),
        })
    }

    /// Reopens a session by loading its source and replaying `history`.
    pub fn replay(id: String, source: Source, history: Vec<Command>) -> ServiceResult<Session> {
        let mut s = Session::open(id, source)?;
        for cmd in history {
            s.execute(cmd)?;
        }
        Ok(s)
    }

    /// Applies `cmd`; on error the session is left unchanged.
    pub fn execute(&mut self, cmd: Command) -> ServiceResult<()> {
        let (gf, vs) = step(&self.gf, &self.vs, &cmd)?;
        self.gf = gf;
        self.vs = vs;
        self.history.push(cmd);
        Ok(())
    }

    /// A new session over the same source with no history.
    pub fn fresh_clone(&self, id: String) -> Session {
        Session {
            id,
            source: self.source.clone(),
            original: self.original.clone(),
            gf: self.original.clone(),
            vs: ViewState::new(&self.original).expect("original frame has metrics"),
            history: Vec::new(),
        }
    }

    pub fn frame(&self) -> &GraphFrame {
        &self.gf
    }

    pub fn view(&self) -> &ViewState {
        &self.vs
    }

    pub fn history(&self) -> &[Command] {
        &self.history
    }

    pub fn layout(&self) -> ServiceResult<LayoutResult> {
        Ok(layout(&self.gf, &self.vs)?)
    }

    /// Histogram of the primary metric, over `[lo, hi]` when both are given.
    pub fn histogram(
        &self,
        bins: Option<usize>,
        lo: Option<f64>,
        hi: Option<f64>,
    ) -> ServiceResult<ButterflyHistogram> {
        let (min, max) = primary_extent(&self.gf, &self.vs.primary)?;
        let bins = bins.unwrap_or(DEFAULT_BINS);
        Ok(histogram_in(
            &self.gf,
            &self.vs.primary,
            bins,
            lo.unwrap_or(min),
            hi.unwrap_or(max),
        )?)
    }

    pub fn export_query(&self) -> ServiceResult<String> {
        Ok(from_view(&self.gf, &self.vs)?.to_string())
    }

    pub fn view_doc(&self) -> ServiceResult<ViewStateDoc> {
        Ok(ViewStateDoc::from_view(&self.gf, &self.vs)?)
    }

    /// Frame and full metric row of the node at `path`.
    pub fn node_detail(&self, path: &str) -> ServiceResult<Value> {
        let gf = &self.gf;
        let id = resolve_path(gf, path)?;
        let node = gf.get(id)?;
        let metrics: Map<String, Value> = gf
            .row(id)?
            .into_iter()
            .map(|(k, v)| (k.to_string(), json!(v)))
            .collect();
        let visible = cct_core::prune::visible_mask(gf, &self.vs)?[id.index()];
        Ok(json!({
            "version": 1,
            "id": id,
            "path": node_path(gf, id)?,
            "name": node.frame.name,
            "file": node.frame.file,
            "line": node.frame.line,
            "depth": node.depth,
            "childCount": node.children.len(),
            "metrics": metrics,
            "visible": visible,
            "collapsed": self.vs.collapsed().contains(&id),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(text: &str) -> Session {
        Session::open(
            "s".into(),
            Source::Text {
                text: text.into(),
                format: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn replay_reproduces_view() {
        let mut s = session("r;a;x 1\nr;b 2\nr;c 0\n");
        s.execute(Command::Collapse {
            path: "r/a".into(),
            collapsed: None,
        })
        .unwrap();
        s.execute(Command::Range {
            range: Some((0.5, 3.0)),
        })
        .unwrap();
        let again = Session::replay("t".into(), s.source.clone(), s.history().to_vec()).unwrap();
        assert_eq!(again.view(), s.view());
        assert_eq!(again.layout().unwrap(), s.layout().unwrap());
    }

    #[test]
    fn failed_command_changes_nothing() {
        let mut s = session("r;a;x 1\n");
        s.execute(Command::Collapse {
            path: "r".into(),
            collapsed: Some(true),
        })
        .unwrap();
        let before = s.view().clone();
        let err = s
            .execute(Command::Collapse {
                path: "r/a".into(),
                collapsed: None,
            })
            .unwrap_err();
        assert_eq!(err.http_status(), 409);
        assert_eq!(s.view(), &before);
        assert_eq!(s.history().len(), 1);
    }

    #[test]
    fn explicit_collapse_is_idempotent() {
        let mut s = session("r;a;x 1\n");
        for _ in 0..2 {
            s.execute(Command::Collapse {
                path: "r/a".into(),
                collapsed: Some(true),
            })
            .unwrap();
        }
        assert_eq!(s.view().collapsed().len(), 1);
    }

    #[test]
    fn applied_query_shows_exactly_the_selection() {
        let mut s = session("r;a;x 1\nr;b 2\nr;c 0\n");
        s.execute(Command::ApplyQuery {
            query: r#"*/["name"=="b"]"#.into(),
        })
        .unwrap();
        let lr = s.layout().unwrap();
        let names: Vec<&str> = lr.nodes.iter().map(|n| n.path.as_str()).collect();
        assert_eq!(names, ["r", "r/b"]);
    }
}
