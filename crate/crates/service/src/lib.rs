//! Read-only HTTP API over one immutable graph snapshot.
//!
//! Requests clone an `Arc` to the current snapshot and work on that, so a
//! [`AppState::replace`] never disturbs requests already in flight.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{any, get};
use axum::Router;
use kgatlas_core::graph::{expand_neighborhood, filter_by_degree, search, GraphExport, RadiusScale};
use kgatlas_core::{AbbrevTable, GraphStats, KnowledgeGraph, NodeId};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

pub const ADDR_ENV: &str = "KGATLAS_ADDR";
pub const PORT_ENV: &str = "KGATLAS_PORT";
pub const DEFAULT_ADDR: &str = "127.0.0.1";
pub const DEFAULT_PORT: u16 = 8080;

pub const GRAPH_PAYLOAD_SCHEMA: &str = include_str!("../schema/graph_payload.schema.json");
pub const STATS_SCHEMA: &str = include_str!("../schema/stats.schema.json");
pub const ABBREVIATIONS_SCHEMA: &str = include_str!("../schema/abbreviations.schema.json");
pub const ERROR_SCHEMA: &str = include_str!("../schema/error.schema.json");
pub const HEALTH_SCHEMA: &str = include_str!("../schema/health.schema.json");

const JSON: &str = "application/json; charset=utf-8";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadMeta {
    pub total_nodes: usize,
    pub total_edges: usize,
    pub min_degree_applied: usize,
    pub max_degree: usize,
}

/// The graph export plus metadata about the loaded snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPayload {
    #[serde(flatten)]
    pub graph: GraphExport,
    pub meta: PayloadMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPayload {
    #[serde(flatten)]
    pub payload: GraphPayload,
    pub matches: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub name: String,
    pub version: String,
    pub nodes: usize,
    pub edges: usize,
}

/// Everything a request needs, computed once at load time.
#[derive(Debug)]
pub struct Snapshot {
    graph: KnowledgeGraph,
    abbrev: AbbrevTable,
    radius: RadiusScale,
    stats_body: Bytes,
    abbrev_body: Bytes,
    full_body: Bytes,
}

impl Snapshot {
    pub fn new(graph: KnowledgeGraph, abbrev: AbbrevTable, radius: RadiusScale) -> Self {
        let stats_body = to_bytes(&GraphStats::compute(&graph));
        let abbrev_body = to_bytes(&abbrev);
        let mut snapshot = Snapshot {
            graph,
            abbrev,
            radius,
            stats_body,
            abbrev_body,
            full_body: Bytes::new(),
        };
        // the unfiltered graph is the most common request; serialize it once
        snapshot.full_body = to_bytes(&snapshot.payload(&snapshot.graph, 0));
        snapshot
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn abbreviations(&self) -> &AbbrevTable {
        &self.abbrev
    }

    pub fn payload(&self, subgraph: &KnowledgeGraph, min_degree: usize) -> GraphPayload {
        GraphPayload {
            graph: subgraph.export(&self.radius),
            meta: PayloadMeta {
                total_nodes: self.graph.node_count(),
                total_edges: self.graph.edge_count(),
                min_degree_applied: min_degree,
                max_degree: self.graph.max_degree(),
            },
        }
    }

    pub fn filtered(&self, min_degree: usize) -> GraphPayload {
        self.payload(&filter_by_degree(&self.graph, min_degree), min_degree)
    }

    pub fn search(&self, query: &str, depth: usize) -> SearchPayload {
        let matches = search(&self.graph, query);
        let subgraph = expand_neighborhood(&self.graph, &matches, depth)
            .expect("search only returns ids from this graph");
        SearchPayload {
            payload: self.payload(&subgraph, 0),
            matches,
        }
    }
}

fn to_bytes<T: Serialize>(value: &T) -> Bytes {
    Bytes::from(serde_json::to_vec(value).expect("payload types serialize"))
}

#[derive(Debug)]
pub struct AppState {
    snapshot: RwLock<Arc<Snapshot>>,
    ui_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(snapshot: Snapshot, ui_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(AppState {
            snapshot: RwLock::new(Arc::new(snapshot)),
            ui_dir,
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.snapshot.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// Swaps in a new snapshot; requests holding the old one finish on it.
    pub fn replace(&self, snapshot: Snapshot) {
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(snapshot);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    status: u16,
    pub error: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            error: code.to_owned(),
            message: message.into(),
        }
    }

    fn bad_param(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "E_BAD_PARAM", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        json_response(status, to_bytes(&self))
    }
}

fn json_response(status: StatusCode, body: Bytes) -> Response {
    (status, [(header::CONTENT_TYPE, JSON)], body).into_response()
}

fn ok(body: Bytes) -> Response {
    json_response(StatusCode::OK, body)
}

type Params = Result<Query<HashMap<String, String>>, QueryRejection>;

fn params(raw: Params) -> Result<HashMap<String, String>, ApiError> {
    raw.map(|Query(p)| p)
        .map_err(|e| ApiError::bad_param(format!("malformed query string: {e}")))
}

fn count_param(params: &HashMap<String, String>, name: &str, default: usize) -> Result<usize, ApiError> {
    match params.get(name).map(|v| v.trim()) {
        None | Some("") => Ok(default),
        Some(v) => v.parse().map_err(|_| {
            ApiError::bad_param(format!("{name} must be a non-negative integer, got {v:?}"))
        }),
    }
}

async fn graph_handler(State(state): State<Arc<AppState>>, raw: Params) -> Result<Response, ApiError> {
    let params = params(raw)?;
    let min_degree = count_param(&params, "min_degree", 0)?;
    let snapshot = state.snapshot();
    if min_degree == 0 {
        return Ok(ok(snapshot.full_body.clone()));
    }
    Ok(ok(to_bytes(&snapshot.filtered(min_degree))))
}

async fn search_handler(State(state): State<Arc<AppState>>, raw: Params) -> Result<Response, ApiError> {
    let params = params(raw)?;
    let query = params.get("q").map(|q| q.trim()).unwrap_or("");
    if query.is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "E_MISSING_QUERY",
            "query parameter q is required",
        ));
    }
    let depth = count_param(&params, "depth", 1)?;
    Ok(ok(to_bytes(&state.snapshot().search(query, depth))))
}

async fn abbreviations_handler(State(state): State<Arc<AppState>>) -> Response {
    ok(state.snapshot().abbrev_body.clone())
}

async fn stats_handler(State(state): State<Arc<AppState>>) -> Response {
    ok(state.snapshot().stats_body.clone())
}

async fn health_handler(State(state): State<Arc<AppState>>) -> Response {
    let snapshot = state.snapshot();
    ok(to_bytes(&Health {
        status: "ok".into(),
        name: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        nodes: snapshot.graph.node_count(),
        edges: snapshot.graph.edge_count(),
    }))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "E_NOT_FOUND", "no such endpoint")
}

const PLACEHOLDER: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>kgatlas</title></head>
<body>
<h1>kgatlas</h1>
<p>No explorer bundle is being served. The JSON API is available:</p>
<ul>
<li><a href=\"/api/graph\">/api/graph?min_degree=k</a></li>
<li>/api/search?q=text&amp;depth=d</li>
<li><a href=\"/api/abbreviations\">/api/abbreviations</a></li>
<li><a href=\"/api/stats\">/api/stats</a></li>
<li><a href=\"/healthz\">/healthz</a></li>
</ul>
</body></html>
";

pub fn router(state: Arc<AppState>) -> Router {
    let ui_dir = state.ui_dir.clone();
    let routes = Router::new()
        .route("/api/graph", get(graph_handler))
        .route("/api/search", get(search_handler))
        .route("/api/abbreviations", get(abbreviations_handler))
        .route("/api/stats", get(stats_handler))
        .route("/api/*rest", any(not_found))
        .route("/healthz", get(health_handler));
    let routes = match ui_dir {
        Some(dir) => routes.fallback_service(ServeDir::new(dir)),
        None => routes
            .route("/", get(|| async { Html(PLACEHOLDER) }))
            .fallback(not_found),
    };
    routes.with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    if let Some(addr) = addr {
        log::info!("listening on http://{addr}");
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
