//! HTTP API over per-session state.
//!
//! Every body is JSON and carries `"version": 1`. Node paths in URLs must be
//! percent-encoded as URL segments (so a literal `%` in a path becomes `%25`).

use std::collections::HashMap;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use cct_core::prune::ViewStateDoc;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{ServiceError, ServiceResult};
use crate::session::{Command, EncodingUpdate, Session, Source};

pub const STATE_VERSION: u32 = 1;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        json_response(status, self.to_json().to_string())
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

/// On-disk record of a session: enough to rebuild it by replay.
#[derive(Debug, Serialize, Deserialize)]
pub struct SessionRecord {
    pub version: u32,
    pub id: String,
    pub source: Source,
    pub history: Vec<Command>,
}

pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    default_source: Option<Source>,
    state_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(default_source: Option<Source>) -> AppState {
        AppState {
            sessions: RwLock::new(HashMap::new()),
            default_source,
            state_dir: None,
        }
    }

    /// Persists sessions under `dir` and restores any already recorded there.
    /// Returns the ids of sessions that failed to restore, with the reason.
    pub fn with_state_dir(mut self, dir: impl Into<PathBuf>) -> ServiceResult<(AppState, Vec<(PathBuf, String)>)> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| ServiceError::io(&dir, e))?;
        let mut failed = Vec::new();
        let entries = std::fs::read_dir(&dir).map_err(|e| ServiceError::io(&dir, e))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            match restore(&path) {
                Ok(s) => {
                    self.sessions
                        .get_mut()
                        .expect("fresh lock")
                        .insert(s.id.clone(), Arc::new(Mutex::new(s)));
                }
                Err(e) => failed.push((path, e.to_string())),
            }
        }
        self.state_dir = Some(dir);
        Ok((self, failed))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    fn session(&self, id: &str) -> ServiceResult<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    fn persist(&self, s: &Session) -> ServiceResult<()> {
        let Some(dir) = &self.state_dir else {
            return Ok(());
        };
        let record = SessionRecord {
            version: STATE_VERSION,
            id: s.id.clone(),
            source: s.source.clone(),
            history: s.history().to_vec(),
        };
        let path = dir.join(format!("{}.json", s.id));
        let tmp = dir.join(format!("{}.json.tmp", s.id));
        let text = serde_json::to_string(&record).expect("record serializes");
        std::fs::write(&tmp, text).map_err(|e| ServiceError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| ServiceError::io(&path, e))
    }
}

fn restore(path: &FsPath) -> ServiceResult<Session> {
    let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
    let record: SessionRecord =
        serde_json::from_str(&text).map_err(|e| ServiceError::BadRequest(format!("{}: {e}", path.display())))?;
    if record.version != STATE_VERSION {
        return Err(ServiceError::BadRequest(format!(
            "{}: unsupported state version {}",
            path.display(),
            record.version
        )));
    }
    Session::replay(record.id, record.source, record.history)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/layout", get(get_layout))
        .route("/sessions/{id}/histogram", get(get_histogram))
        .route("/sessions/{id}/collapse", post(post_collapse))
        .route("/sessions/{id}/range", post(post_range))
        .route("/sessions/{id}/encoding", post(post_encoding))
        .route("/sessions/{id}/node/{*path}", get(get_node))
        .route("/sessions/{id}/query", get(get_query))
        .route("/sessions/{id}/apply-query", post(post_apply_query))
        .route("/sessions/{id}/viewstate", get(get_viewstate).put(put_viewstate))
        .with_state(state)
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ServiceResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    #[serde(default)]
    source: Option<PathBuf>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    format: Option<String>,
}

async fn create_session(State(app): State<Arc<AppState>>, bytes: Bytes) -> Response {
    respond(create(&app, &bytes), StatusCode::CREATED)
}

fn create(app: &AppState, bytes: &Bytes) -> ServiceResult<String> {
    let req: CreateBody = if bytes.iter().all(u8::is_ascii_whitespace) {
        CreateBody {
            source: None,
            text: None,
            format: None,
        }
    } else {
        body(bytes)?
    };
    let source = match (req.source, req.text) {
        (Some(_), Some(_)) => {
            return Err(ServiceError::BadRequest(
                "give either `source` or `text`, not both".into(),
            ))
        }
        (Some(path), None) => Source::File {
            path,
            format: req.format,
        },
        (None, Some(text)) => Source::Text {
            text,
            format: req.format,
        },
        (None, None) => match &app.default_source {
            Some(s) => s.clone(),
            None => {
                return Err(ServiceError::BadRequest(
                    "no source given and no default profile".into(),
                ))
            }
        },
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::open(id.clone(), source)?;
    app.persist(&session)?;
    app.sessions
        .write()
        .expect("session map poisoned")
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok(json!({ "version": 1, "sessionId": id }).to_string())
}

fn respond(result: ServiceResult<String>, status: StatusCode) -> Response {
    match result {
        Ok(text) => json_response(status, text),
        Err(e) => e.into_response(),
    }
}

/// Runs `f` with the session locked.
fn with_session<T>(app: &AppState, id: &str, f: impl FnOnce(&mut Session) -> ServiceResult<T>) -> ServiceResult<T> {
    let handle = app.session(id)?;
    let mut s = handle.lock().unwrap_or_else(|p| p.into_inner());
    f(&mut s)
}

/// Executes `cmd`, persists the history and answers with the new layout.
fn mutate(app: &AppState, id: &str, cmd: Command) -> Response {
    let result = with_session(app, id, |s| {
        s.execute(cmd)?;
        app.persist(s)?;
        Ok(s.layout()?.to_json())
    });
    respond(result, StatusCode::OK)
}

async fn get_layout(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    respond(with_session(&app, &id, |s| Ok(s.layout()?.to_json())), StatusCode::OK)
}

fn number(params: &HashMap<String, String>, key: &str) -> ServiceResult<Option<f64>> {
    match params.get(key).map(|s| s.trim()) {
        None | Some("") => Ok(None),
        Some(s) => s
            .parse::<f64>()
            .map(Some)
            .map_err(|_| ServiceError::BadRequest(format!("`{key}` is not a number: `{s}`"))),
    }
}

async fn get_histogram(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let result = (|| {
        let bins = match params.get("bins").map(|s| s.trim()) {
            None | Some("") => None,
            Some(s) => Some(
                s.parse::<usize>()
                    .map_err(|_| ServiceError::BadRequest(format!("`bins` is not a count: `{s}`")))?,
            ),
        };
        let (lo, hi) = (number(&params, "lo")?, number(&params, "hi")?);
        with_session(&app, &id, |s| {
            let h = s.histogram(bins, lo, hi)?;
            let mut v = serde_json::to_value(&h).expect("histogram serializes");
            v["version"] = json!(1);
            Ok(v.to_string())
        })
    })();
    respond(result, StatusCode::OK)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CollapseBody {
    path: String,
    #[serde(default)]
    collapsed: Option<bool>,
}

async fn post_collapse(State(app): State<Arc<AppState>>, Path(id): Path<String>, bytes: Bytes) -> Response {
    match body::<CollapseBody>(&bytes) {
        Ok(b) => mutate(
            &app,
            &id,
            Command::Collapse {
                path: b.path,
                collapsed: b.collapsed,
            },
        ),
        Err(e) => e.into_response(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeBody {
    #[serde(default)]
    lo: Option<f64>,
    #[serde(default)]
    hi: Option<f64>,
}

async fn post_range(State(app): State<Arc<AppState>>, Path(id): Path<String>, bytes: Bytes) -> Response {
    let range = body::<RangeBody>(&bytes).and_then(|b| match (b.lo, b.hi) {
        (Some(lo), Some(hi)) => Ok(Some((lo, hi))),
        (None, None) => Ok(None),
        _ => Err(ServiceError::BadRequest("give both `lo` and `hi`, or neither".into())),
    });
    match range {
        Ok(range) => mutate(&app, &id, Command::Range { range }),
        Err(e) => e.into_response(),
    }
}

async fn post_encoding(State(app): State<Arc<AppState>>, Path(id): Path<String>, bytes: Bytes) -> Response {
    match body::<EncodingUpdate>(&bytes) {
        Ok(u) => mutate(&app, &id, Command::Encoding(u)),
        Err(e) => e.into_response(),
    }
}

async fn get_node(State(app): State<Arc<AppState>>, Path((id, path)): Path<(String, String)>) -> Response {
    respond(
        with_session(&app, &id, |s| Ok(s.node_detail(&path)?.to_string())),
        StatusCode::OK,
    )
}

async fn get_query(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    respond(
        with_session(&app, &id, |s| {
            Ok(json!({ "version": 1, "query": s.export_query()? }).to_string())
        }),
        StatusCode::OK,
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyBody {
    query: String,
}

async fn post_apply_query(State(app): State<Arc<AppState>>, Path(id): Path<String>, bytes: Bytes) -> Response {
    match body::<ApplyBody>(&bytes) {
        Ok(b) => mutate(&app, &id, Command::ApplyQuery { query: b.query }),
        Err(e) => e.into_response(),
    }
}

async fn get_viewstate(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    respond(
        with_session(&app, &id, |s| {
            Ok(serde_json::to_string(&s.view_doc()?).expect("view state serializes"))
        }),
        StatusCode::OK,
    )
}

async fn put_viewstate(State(app): State<Arc<AppState>>, Path(id): Path<String>, bytes: Bytes) -> Response {
    match body::<ViewStateDoc>(&bytes) {
        Ok(doc) => mutate(&app, &id, Command::ViewState(doc)),
        Err(e) => e.into_response(),
    }
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
