//! HTTP API over co-design projects.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/projects` | create from `{"dataset": {"toy": {"n", "seed"}} \| {"csv": "..."}, "settings"?, "graph"?}` |
//! | GET | `/projects/{id}` | summary |
//! | GET | `/projects/{id}/correlations?reps&adjust` | correlation matrix and screening p-values |
//! | PUT | `/projects/{id}/graph` | replace the working graph |
//! | POST | `/projects/{id}/iterations` | run one iteration, `{"note"?}` |
//! | GET | `/projects/{id}/iterations/{k}` | snapshot |
//! | GET | `/projects/{id}/iterations/{k}/dot?view=effects\|cov` | Graphviz text |
//! | GET | `/projects/{id}/diff?from&to` | record-level diff of two snapshots |

mod error;
mod stable;
mod state;

pub use error::ApiError;
pub use stable::Stable;
pub use state::AppState;

use std::net::SocketAddr;
use std::path::Path;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::Router;
use chrono::{DateTime, Utc};
use codesign_core::bootstrap::{derive_substream, screen, ResamplingPlan, ScreenAdjust, Scheme, DEFAULT_OUTER_REPS};
use codesign_core::data::Dataset;
use codesign_core::family::MODEL_FIT_ID;
use codesign_core::graph::CausalGraph;
use codesign_core::session::{export_dot, DatasetRef, DotView, Project, ProjectStore, Settings};
use codesign_core::toy::generate_toy_dataset;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/correlations", get(correlations))
        .route("/projects/{id}/graph", put(put_graph).get(get_graph))
        .route("/projects/{id}/iterations", post(run_iteration).delete(history_is_immutable))
        .route(
            "/projects/{id}/iterations/{k}",
            get(get_iteration)
                .put(history_is_immutable)
                .patch(history_is_immutable)
                .delete(history_is_immutable),
        )
        .route("/projects/{id}/iterations/{k}/dot", get(get_dot))
        .route("/projects/{id}/diff", get(get_diff))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, data_dir: impl AsRef<Path>) -> std::io::Result<()> {
    let store = ProjectStore::open(data_dir.as_ref()).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(store))).await
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> codesign_core::Result<T> + Send + 'static,
    T: Send + 'static,
{
    Ok(tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??)
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum DatasetSource {
    Toy { n: usize, seed: u64 },
    Csv(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateProject {
    dataset: Option<DatasetSource>,
    #[serde(default)]
    settings: Settings,
    graph: Option<Value>,
}

#[derive(Serialize)]
struct IterationSummary {
    index: usize,
    note: String,
    created_at: DateTime<Utc>,
    graph_version: u64,
    records: usize,
    rejected: usize,
    model_fit_p: Option<f64>,
}

#[derive(Serialize)]
struct ProjectSummary<'a> {
    id: &'a str,
    dataset: &'a DatasetRef,
    graph: &'a CausalGraph,
    settings: &'a Settings,
    iterations: Vec<IterationSummary>,
}

fn summary(p: &Project) -> ProjectSummary<'_> {
    ProjectSummary {
        id: &p.id,
        dataset: &p.dataset_ref,
        graph: p.graph(),
        settings: &p.settings,
        iterations: p
            .iterations()
            .iter()
            .map(|s| IterationSummary {
                index: s.index,
                note: s.note.clone(),
                created_at: s.created_at,
                graph_version: s.graph_frozen.version(),
                records: s.family.records.len(),
                rejected: s.family.records.iter().filter(|r| r.rejected == Some(true)).count(),
                model_fit_p: s.record(MODEL_FIT_ID).and_then(|r| r.raw_p),
            })
            .collect(),
    }
}

async fn create_project(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: CreateProject = parse_body(&body)?;
    let source = req.dataset.ok_or_else(|| ApiError::bad_request("`dataset` is required"))?;
    req.settings.validate()?;
    let graph = req
        .graph
        .map(|g| CausalGraph::from_json(&g.to_string()))
        .transpose()?;
    let data = blocking(move || match source {
        DatasetSource::Toy { n, seed } => generate_toy_dataset(n, seed),
        DatasetSource::Csv(text) => Dataset::from_csv_reader(text.as_bytes(), None),
    })
    .await
    .map_err(|e| ApiError::bad_request(e.message))?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let mut project = Project::new(id, &data, req.settings)?;
    if let Some(g) = graph {
        project.set_graph(g)?;
    }
    let body = serde_json::to_value(summary(&project)).map_err(|e| ApiError::internal(e.to_string()))?;
    let st = state.clone();
    tokio::task::spawn_blocking(move || st.insert(project, data))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Stable(StatusCode::CREATED, body).into_response())
}

async fn list_projects(State(state): State<AppState>) -> ApiResult<Response> {
    let ids = state.store().list()?;
    Ok(Stable(StatusCode::OK, serde_json::json!({ "projects": ids })).into_response())
}

async fn get_project(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let loaded = state.read(&id)?;
    Ok(Stable(StatusCode::OK, summary(&loaded.project)).into_response())
}

async fn get_graph(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let loaded = state.read(&id)?;
    Ok(Stable(StatusCode::OK, loaded.project.graph()).into_response())
}

#[derive(Debug, Deserialize)]
struct CorrelationQuery {
    reps: Option<usize>,
    adjust: Option<ScreenAdjust>,
}

async fn correlations(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<CorrelationQuery>,
) -> ApiResult<Response> {
    let loaded = state.read(&id)?;
    let reps = query.reps.unwrap_or(DEFAULT_OUTER_REPS);
    if reps == 0 {
        return Err(ApiError::bad_request("reps must be positive"));
    }
    let plan = ResamplingPlan {
        reps_outer: reps,
        reps_inner: 0,
        master_seed: derive_substream(loaded.project.settings.master_seed, "screen"),
        scheme: Scheme::Permutation,
    };
    let adjust = query.adjust.unwrap_or(ScreenAdjust::Bh);
    let table = blocking(move || screen(&loaded.data, &plan, adjust)).await?;
    Ok(Stable(StatusCode::OK, table).into_response())
}

async fn put_graph(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Response> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let graph = CausalGraph::from_json(text)?;
    let project = state
        .update(&id, move |p, _| {
            p.set_graph(graph)?;
            Ok(p.graph().clone())
        })
        .await?;
    Ok(Stable(StatusCode::OK, project).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct IterationRequest {
    #[serde(default)]
    note: String,
}

async fn run_iteration(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Response> {
    let req: IterationRequest = parse_body(&body)?;
    let snapshot = state
        .update(&id, move |p, data| p.run_iteration(data, &req.note).cloned())
        .await?;
    Ok(Stable(StatusCode::CREATED, snapshot).into_response())
}

async fn history_is_immutable() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "immutable_history",
        "iteration snapshots are append-only",
    )
}

async fn get_iteration(
    State(state): State<AppState>,
    UrlPath((id, k)): UrlPath<(String, usize)>,
) -> ApiResult<Response> {
    let loaded = state.read(&id)?;
    let snapshot = loaded.project.iteration(k)?;
    Ok(Stable(StatusCode::OK, snapshot).into_response())
}

#[derive(Debug, Deserialize)]
struct DotQuery {
    view: Option<String>,
}

async fn get_dot(
    State(state): State<AppState>,
    UrlPath((id, k)): UrlPath<(String, usize)>,
    Query(query): Query<DotQuery>,
) -> ApiResult<Response> {
    let view = match query.view.as_deref().unwrap_or("effects") {
        "effects" => DotView::Effects,
        "cov" | "covariances" | "induced_covariances" => DotView::InducedCovariances,
        other => return Err(ApiError::bad_request(format!("unknown view `{other}`; use effects or cov"))),
    };
    let loaded = state.read(&id)?;
    let snapshot = loaded.project.iteration(k)?;
    let dot = export_dot(snapshot, view, snapshot.q());
    Ok(([(header::CONTENT_TYPE, "text/vnd.graphviz")], dot).into_response())
}

#[derive(Debug, Deserialize)]
struct DiffQuery {
    from: Option<usize>,
    to: Option<usize>,
}

async fn get_diff(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<DiffQuery>,
) -> ApiResult<Response> {
    let (Some(from), Some(to)) = (query.from, query.to) else {
        return Err(ApiError::bad_request("`from` and `to` are required"));
    };
    let loaded = state.read(&id)?;
    let diff = loaded.project.diff(from, to)?;
    Ok(Stable(StatusCode::OK, diff).into_response())
}
