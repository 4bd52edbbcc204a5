//! HTTP facade over the counterfactual engine.
//!
//! Models are uploaded (or referenced by server-side path) together with
//! their dataset; the live-region index is built at load time so a query
//! only pays for the scan. Query and result bodies use the exchange format
//! from `lire_core::exchange`. All query paths are read-only: a model is
//! shared behind an `Arc` and the registry lock is held only to look it up.

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lire_core::{
    build_index, dataset_search, find_ce, region_growth_curve, Dataset, Forest, ForestStats, GrowthMode, LireError,
    LiveRegionIndex, QueryDocument, Task,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Uploads carry whole datasets.
const BODY_LIMIT: usize = 256 * 1024 * 1024;

pub struct SessionModel {
    pub id: String,
    pub forest: Forest,
    pub index: LiveRegionIndex,
    pub data: Dataset,
    /// Milliseconds since the Unix epoch.
    pub loaded_at: u64,
}

#[derive(Default)]
pub struct AppState {
    models: RwLock<BTreeMap<String, Arc<SessionModel>>>,
    next_id: AtomicU64,
}

impl AppState {
    /// Builds the index and registers the model under a fresh id.
    pub fn load(&self, forest: Forest, data: Dataset) -> Result<Arc<SessionModel>, ApiError> {
        let index = build_index(&forest, &data)?;
        let id = format!("m{}", self.next_id.fetch_add(1, Ordering::Relaxed) + 1);
        let loaded_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        let model = Arc::new(SessionModel { id: id.clone(), forest, index, data, loaded_at });
        self.models.write().expect("registry lock").insert(id, model.clone());
        Ok(model)
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionModel>, ApiError> {
        self.models
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown model {id:?}")))
    }

    fn remove(&self, id: &str) -> bool {
        self.models.write().expect("registry lock").remove(id).is_some()
    }

    fn list(&self) -> Vec<Arc<SessionModel>> {
        self.models.read().expect("registry lock").values().cloned().collect()
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<LireError> for ApiError {
    fn from(e: LireError) -> Self {
        let status = match e {
            LireError::TargetMismatch(_) => StatusCode::CONFLICT,
            LireError::NoLiveTarget | LireError::AllTargetsInfeasible | LireError::NoQualifyingRow => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            LireError::IllConditioned(_) | LireError::Infeasible | LireError::Io(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/models", post(load_model).get(list_models))
        .route("/models/{id}", get(describe_model).delete(delete_model))
        .route("/models/{id}/instances/{n}", get(instance))
        .route("/models/{id}/counterfactual", post(counterfactual))
        .route("/models/{id}/regions/growth", get(growth))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

#[derive(Serialize)]
struct ModelSummary {
    id: String,
    #[serde(rename = "M")]
    live_regions: usize,
    stats: ForestStats,
}

fn summary(model: &SessionModel) -> ModelSummary {
    ModelSummary { id: model.id.clone(), live_regions: model.index.len(), stats: model.forest.stats() }
}

fn task_name(task: Task) -> &'static str {
    match task {
        Task::Classification => "classification",
        Task::Regression => "regression",
    }
}

/// Multipart fields: `model` and `data` (uploads) or `model_path` and
/// `data_path` (server-side files); optional `header` and `label_col`.
async fn load_model(State(state): State<Arc<AppState>>, mut form: Multipart) -> ApiResult<impl IntoResponse> {
    let mut fields: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    while let Some(field) = form.next_field().await.map_err(|e| ApiError::bad_request(e.body_text()))? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| ApiError::bad_request(e.body_text()))?;
        fields.insert(name, bytes.to_vec());
    }
    let text = |name: &str| -> ApiResult<Option<String>> {
        fields
            .get(name)
            .map(|b| String::from_utf8(b.clone()).map_err(|_| ApiError::bad_request(format!("field {name} is not UTF-8"))))
            .transpose()
    };
    let read_path = |name: &str| -> ApiResult<Option<String>> {
        let Some(path) = text(name)? else { return Ok(None) };
        std::fs::read_to_string(path.trim())
            .map(Some)
            .map_err(|e| ApiError::bad_request(format!("cannot read {path}: {e}")))
    };
    let model_text = match text("model")? {
        Some(t) => t,
        None => read_path("model_path")?.ok_or_else(|| ApiError::bad_request("missing model or model_path"))?,
    };
    let data_text = match text("data")? {
        Some(t) => t,
        None => read_path("data_path")?.ok_or_else(|| ApiError::bad_request("missing data or data_path"))?,
    };
    let header = text("header")?.is_some_and(|h| h.trim() == "true");
    let label_col = match text("label_col")? {
        Some(c) => Some(c.trim().parse().map_err(|_| ApiError::bad_request("label_col is not an index"))?),
        None => None,
    };
    let forest = Forest::from_json(&model_text)?;
    let data = Dataset::from_csv(data_text.as_bytes(), header, label_col)?;
    if data.n_features() != forest.n_features() {
        return Err(LireError::DimensionMismatch { expected: forest.n_features(), got: data.n_features() }.into());
    }
    let model = tokio::task::spawn_blocking(move || state.load(forest, data)).await.map_err(internal)??;
    Ok((StatusCode::CREATED, Json(summary(&model))))
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

async fn list_models(State(state): State<Arc<AppState>>) -> Json<Vec<Value>> {
    Json(
        state
            .list()
            .iter()
            .map(|m| json!({ "id": m.id, "M": m.index.len(), "stats": m.forest.stats(), "task": task_name(m.forest.task()) }))
            .collect(),
    )
}

/// Live outputs at a glance: regions per class, or the output range.
fn output_summary(index: &LiveRegionIndex) -> Value {
    match index.task() {
        Task::Classification => {
            let mut counts = vec![0usize; index.n_outputs()];
            for m in 0..index.len() {
                counts[lire_core::forest::argmax(index.output(m))] += 1;
            }
            json!({ "classes": counts })
        }
        Task::Regression => {
            let (lo, hi) = (index.output(0)[0], index.output(index.len() - 1)[0]);
            json!({ "intervals": { "min": lo, "max": hi } })
        }
    }
}

async fn describe_model(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let m = state.get(&id)?;
    Ok(Json(json!({
        "id": m.id,
        "M": m.index.len(),
        "N": m.data.len(),
        "stats": m.forest.stats(),
        "task": task_name(m.forest.task()),
        "D": m.forest.n_features(),
        "K": m.forest.n_outputs(),
        "feature_names": m.forest.feature_names(),
        "loaded_at": m.loaded_at,
        "outputs": output_summary(&m.index),
    })))
}

async fn delete_model(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    if state.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown model {id:?}")))
    }
}

async fn instance(State(state): State<Arc<AppState>>, Path((id, n)): Path<(String, usize)>) -> ApiResult<Json<Value>> {
    let m = state.get(&id)?;
    if n >= m.data.len() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("instance {n} out of range (N = {})", m.data.len())));
    }
    let x = m.data.row(n);
    let p = m.forest.predict(x)?;
    Ok(Json(json!({
        "row": n,
        "x": x,
        "prediction": { "output": p.output, "label": p.label() },
        "label": m.data.labels().map(|l| l[n]),
    })))
}

async fn counterfactual(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: String,
) -> ApiResult<Json<Value>> {
    let m = state.get(&id)?;
    let doc = QueryDocument::parse(&body)?;
    let query = doc.to_query()?;
    let with_baselines = doc.with_baselines.unwrap_or(false);
    tokio::task::spawn_blocking(move || {
        let start = Instant::now();
        let result = find_ce(&m.forest, &m.index, &query)?;
        let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        let mut out = serde_json::to_value(&result).map_err(internal)?;
        out["elapsed_ms"] = json!(elapsed_ms);
        if with_baselines {
            out["witness_instance"] = json!(result.witness.map(|w| m.data.row(w)));
            let dataset = match dataset_search(&m.forest, &m.data, &query) {
                Ok(r) => serde_json::to_value(&r).map_err(internal)?,
                Err(LireError::NoQualifyingRow) => Value::Null,
                Err(e) => return Err(e.into()),
            };
            out["baselines"] = json!({ "dataset": dataset });
        }
        Ok(Json(out))
    })
    .await
    .map_err(internal)?
}

#[derive(Deserialize)]
struct GrowthParams {
    mode: Option<GrowthMode>,
    cap: Option<usize>,
}

async fn growth(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(params): Query<GrowthParams>,
) -> ApiResult<Json<Value>> {
    let m = state.get(&id)?;
    let mode = params.mode.unwrap_or(GrowthMode::ByTrees);
    let cap = params.cap.unwrap_or(100_000);
    tokio::task::spawn_blocking(move || {
        let curve = region_growth_curve(&m.forest, &m.data, mode, cap)?;
        Ok(Json(serde_json::to_value(&curve).map_err(internal)?))
    })
    .await
    .map_err(internal)?
}
