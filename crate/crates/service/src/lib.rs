//! HTTP/JSON API over models, scenarios and reasoning.
//!
//! A scenario is a base model plus an assertion map and an objective
//! selection. Base models are immutable once stored; every solve works on a
//! fresh copy with the scenario's assertions applied.

pub mod error;
pub mod graph;
pub mod store;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use cgm_core::json::{model_from_json, model_value};
use cgm_core::reasoner::{self, CoreResult, Realization};
use cgm_core::{check_realization, Cgm, ObjectiveSpec, SolveOptions, SolveOutcome};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

pub use error::ApiError;
pub use store::{ModelRecord, ScenarioRecord, Store, StoreError};

pub const DEFAULT_MAX_TIMEOUT: Duration = Duration::from_secs(60);
const DEFAULT_PAGE: usize = 20;
const MAX_PAGE: usize = 1000;

#[derive(Clone)]
pub struct AppState {
    store: Arc<RwLock<Store>>,
    max_timeout: Duration,
}

impl AppState {
    pub fn new(store: Store, max_timeout: Duration) -> Self {
        Self { store: Arc::new(RwLock::new(store)), max_timeout }
    }
}

type ApiResult<T> = Result<T, ApiError>;

const ROUTES: &[(&str, &str, &str)] = &[
    ("GET", "/healthz", "liveness probe"),
    ("GET", "/api", "this listing"),
    ("POST", "/models", "store a model given as modelling-language text or JSON"),
    ("GET", "/models/{id}", "canonical JSON of a model"),
    ("GET", "/models/{id}/graph", "nodes, edges and classification for rendering"),
    ("POST", "/models/{id}/scenarios", "new scenario; optional body {assertions, objectives}"),
    ("GET", "/scenarios/{id}", "scenario record"),
    ("PATCH", "/scenarios/{id}/assertions", "body {label: true|false|null}; null clears"),
    ("POST", "/scenarios/{id}/solve", "body {mode, lex, limit, timeout, seed}"),
    ("POST", "/scenarios/{id}/core", "minimal conflicting constraint groups"),
    ("GET", "/scenarios/{id}/realizations", "enumeration page, query limit=K"),
];

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/api", get(api))
        .route("/models", post(create_model))
        .route("/models/{id}", get(get_model))
        .route("/models/{id}/graph", get(get_graph))
        .route("/models/{id}/scenarios", post(create_scenario))
        .route("/scenarios/{id}", get(get_scenario))
        .route("/scenarios/{id}/assertions", patch(patch_assertions))
        .route("/scenarios/{id}/solve", post(solve))
        .route("/scenarios/{id}/core", post(core))
        .route("/scenarios/{id}/realizations", get(realizations))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

async fn api() -> Json<Value> {
    let routes: Vec<Value> =
        ROUTES.iter().map(|(m, p, d)| json!({ "method": m, "path": p, "description": d })).collect();
    Json(json!({ "routes": routes }))
}

fn store_error(e: StoreError) -> ApiError {
    ApiError::internal(e.to_string())
}

impl AppState {
    fn model(&self, id: &str) -> ApiResult<ModelRecord> {
        let store = self.store.read().expect("store lock");
        store.models.get(id).cloned().ok_or_else(|| ApiError::not_found("model", id))
    }

    fn scenario(&self, id: &str) -> ApiResult<ScenarioRecord> {
        let store = self.store.read().expect("store lock");
        store.scenarios.get(id).cloned().ok_or_else(|| ApiError::not_found("scenario", id))
    }

    /// The scenario and its base model with the scenario's assertions applied.
    fn scenario_model(&self, id: &str) -> ApiResult<(ScenarioRecord, Cgm)> {
        let s = self.scenario(id)?;
        let base = self.model(&s.model_id)?;
        let m = base.model.with_assertions(&s.assertions)?;
        Ok((s, m))
    }

    fn options(&self, timeout: Option<f64>, seed: Option<u64>) -> ApiResult<SolveOptions> {
        let t = match timeout {
            Some(t) if !(t.is_finite() && t > 0.0) => return Err(ApiError::bad_request(format!("invalid timeout {t}"))),
            Some(t) => Duration::from_secs_f64(t).min(self.max_timeout),
            None => self.max_timeout,
        };
        let mut opts = SolveOptions::with_timeout(t);
        opts.seed = seed.unwrap_or(0);
        Ok(opts)
    }
}

fn is_json(headers: &HeaderMap, body: &str) -> bool {
    let declared = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    declared || body.trim_start().starts_with('{')
}

async fn create_model(State(st): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<impl IntoResponse> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let model = if is_json(&headers, text) {
        model_from_json(text).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "SchemaError", e.to_string()))?
    } else {
        cgm_core::load(text)?
    };
    let rec = st.store.write().expect("store lock").add_model(model).map_err(store_error)?;
    let body = json!({
        "modelId": rec.id,
        "createdAt": rec.created_at,
        "report": { "issues": [] },
        "nodes": rec.model.num_nodes(),
    });
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_model(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(model_value(&st.model(&id)?.model)))
}

async fn get_graph(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<graph::Graph>> {
    Ok(Json(graph::graph(&st.model(&id)?.model)))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NewScenario {
    assertions: Option<BTreeMap<String, bool>>,
    #[serde(default)]
    objectives: Vec<LexItem>,
}

/// An objective id, or an id with a direction.
#[derive(Deserialize)]
#[serde(untagged)]
enum LexItem {
    Id(String),
    Spec(ObjectiveSpec),
}

impl From<LexItem> for ObjectiveSpec {
    fn from(l: LexItem) -> Self {
        match l {
            LexItem::Id(id) => ObjectiveSpec::named(&id),
            LexItem::Spec(s) => s,
        }
    }
}

fn parse_json<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn create_scenario(
    State(st): State<AppState>,
    Path(model_id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let base = st.model(&model_id)?;
    let req: NewScenario = parse_json(&body)?;
    // Without an explicit map the scenario starts from the model's own marks.
    let assertions = req.assertions.unwrap_or_else(|| base.model.assertions.iter().cloned().collect());
    base.model.with_assertions(&assertions)?;
    let objectives: Vec<ObjectiveSpec> = req.objectives.into_iter().map(Into::into).collect();
    if !objectives.is_empty() {
        cgm_core::encode(&base.model, &objectives)?;
    }
    let scenario = ScenarioRecord {
        id: store::new_id(),
        model_id,
        assertions,
        objectives,
        created_at: store::now(),
    };
    st.store.write().expect("store lock").put_scenario(scenario.clone()).map_err(store_error)?;
    Ok((StatusCode::CREATED, Json(scenario)))
}

async fn get_scenario(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ScenarioRecord>> {
    Ok(Json(st.scenario(&id)?))
}

async fn patch_assertions(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<ScenarioRecord>> {
    let changes: BTreeMap<String, Option<bool>> = parse_json(&body)?;
    let mut s = st.scenario(&id)?;
    let base = st.model(&s.model_id)?;
    for (label, value) in &changes {
        base.model.assert_element(label, *value)?;
        match value {
            Some(v) => s.assertions.insert(label.clone(), *v),
            None => s.assertions.remove(label),
        };
    }
    st.store.write().expect("store lock").put_scenario(s.clone()).map_err(store_error)?;
    Ok(Json(s))
}

#[derive(Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum Mode {
    Check,
    Optimize,
    Enumerate,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolveRequest {
    mode: Option<Mode>,
    lex: Option<Vec<LexItem>>,
    limit: Option<usize>,
    timeout: Option<f64>,
    seed: Option<u64>,
}

fn verified(m: &Cgm, r: &Realization) -> ApiResult<()> {
    match check_realization(m, r).first() {
        None => Ok(()),
        Some(v) => Err(ApiError::internal(format!("result failed verification at {}: {}", v.at, v.message))),
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))
}

fn outcome_json(m: &Cgm, out: &SolveOutcome) -> ApiResult<Value> {
    if let Some(r) = out.realization() {
        verified(m, r)?;
    }
    if let SolveOutcome::Budget { best: Some(r), .. } = out {
        verified(m, r)?;
    }
    let mut v = serde_json::to_value(out).expect("serializable");
    if let SolveOutcome::Unrealizable { core: Some(core) } = out {
        v["coreGroups"] = serde_json::to_value(graph::core_groups(m, core)).expect("serializable");
    }
    Ok(v)
}

async fn solve(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: SolveRequest = parse_json(&body)?;
    let (s, m) = st.scenario_model(&id)?;
    let opts = st.options(req.timeout, req.seed)?;
    let specs: Vec<ObjectiveSpec> = match req.lex {
        Some(lex) => lex.into_iter().map(Into::into).collect(),
        None => s.objectives.clone(),
    };
    let mode = req.mode.unwrap_or(if req.limit.is_some() {
        Mode::Enumerate
    } else if specs.is_empty() {
        Mode::Check
    } else {
        Mode::Optimize
    });
    if mode == Mode::Enumerate {
        return page(m, req.limit, opts).await.map(Json);
    }
    let m = Arc::new(m);
    let mm = m.clone();
    let out = blocking(move || match mode {
        Mode::Check => Ok(reasoner::check_realizability(&mm, &opts)),
        _ => reasoner::optimize(&mm, &specs, &opts),
    })
    .await??;
    Ok(Json(outcome_json(&m, &out)?))
}

async fn core(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let (_, m) = st.scenario_model(&id)?;
    let opts = st.options(None, None)?;
    let m = Arc::new(m);
    let mm = m.clone();
    let out = blocking(move || reasoner::unsat_core(&mm, &opts)).await?;
    let mut v = serde_json::to_value(&out).expect("serializable");
    if let CoreResult::Core { groups } = &out {
        v["coreGroups"] = serde_json::to_value(graph::core_groups(&m, groups)).expect("serializable");
    }
    Ok(Json(v))
}

async fn page(m: Cgm, limit: Option<usize>, opts: SolveOptions) -> ApiResult<Value> {
    let limit = limit.unwrap_or(DEFAULT_PAGE);
    if limit == 0 || limit > MAX_PAGE {
        return Err(ApiError::bad_request(format!("limit must be between 1 and {MAX_PAGE}")));
    }
    let m = Arc::new(m);
    let mm = m.clone();
    let (all, exhausted) = blocking(move || {
        let mut it = reasoner::enumerate(&mm, &opts);
        let all: Vec<Realization> = it.by_ref().take(limit).collect();
        // Probe once more so a full page can still report exhaustion.
        let exhausted = it.exhausted() || (all.len() == limit && it.next().is_none() && it.exhausted());
        (all, exhausted)
    })
    .await?;
    for r in &all {
        verified(&m, r)?;
    }
    Ok(json!({ "realizations": all, "exhausted": exhausted }))
}

#[derive(Deserialize)]
struct PageQuery {
    limit: Option<usize>,
}

async fn realizations(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<PageQuery>,
) -> ApiResult<Json<Value>> {
    let (_, m) = st.scenario_model(&id)?;
    let opts = st.options(None, None)?;
    page(m, q.limit, opts).await.map(Json)
}
