//! HTTP routes.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use firecover_core::geo::CellIndex;
use firecover_core::model::YearMonth;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;
use tracing::{info, warn};

use crate::dataset::Dataset;
use crate::error::{ServiceError, ServiceResult};
use crate::jobs::{JobHandle, JobKind, JobOutput, JobStore};
use crate::ops::{self, EvaluateRequest, OptimizeRequest, SimulateRequest};
use crate::schema;

pub struct AppState {
    pub dataset: Arc<Dataset>,
    pub jobs: JobStore,
}

impl AppState {
    pub fn new(dataset: Dataset) -> Self {
        let jobs = JobStore::new(dataset.config.server.max_concurrent_jobs);
        AppState { dataset: Arc::new(dataset), jobs }
    }
}

type AppResult<T> = ServiceResult<Json<T>>;
type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/load-report", get(load_report))
        .route("/api/stats/yearly", get(yearly))
        .route("/api/stats/response-distribution", get(distribution))
        .route("/api/stats/stations", get(stations))
        .route("/api/sd-series", get(sd_series))
        .route("/api/grid", get(grid))
        .route("/api/grid/{row}/{col}", get(grid_cell))
        .route("/api/reachability", get(reachability))
        .route("/api/underserved", get(underserved))
        .route("/api/station/{id}/profile", get(profile))
        .route("/api/evaluate", post(evaluate))
        .route("/api/optimize", post(optimize))
        .route("/api/simulate", post(simulate))
        .route("/api/jobs", get(list_jobs))
        .route("/api/jobs/{id}", get(job))
        .route("/api/jobs/{id}/result", get(job_result))
        .route("/api/solutions/{job}/pareto", get(pareto))
        .route("/api/schema", get(schema_index))
        .route("/api/schema/{name}", get(schema_by_name))
        .with_state(state)
}

/// Decodes a JSON body: malformed JSON is a 400, well-formed JSON of the
/// wrong shape a 422.
fn decode<T: DeserializeOwned>(body: &Bytes) -> ServiceResult<T> {
    serde_json::from_slice(body).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ServiceError::Core(firecover_core::Error::Json(e)),
        _ => ServiceError::BadRequest(e.to_string()),
    })
}

#[derive(Debug, Default, Deserialize)]
struct KQuery {
    k: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct ProfileQuery {
    k: Option<f64>,
    tod_width: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
struct MonthQuery {
    month: Option<String>,
}

async fn health() -> Json<Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn load_report(State(s): Shared) -> Json<crate::dataset::LoadReport> {
    Json(s.dataset.report.clone())
}

async fn yearly(State(s): Shared) -> Json<Vec<ops::YearCount>> {
    Json(ops::yearly(&s.dataset))
}

async fn distribution(State(s): Shared) -> Json<Vec<firecover_core::analytics::YearDistribution>> {
    Json(ops::distribution(&s.dataset))
}

async fn stations(State(s): Shared, Query(q): Query<KQuery>) -> AppResult<Vec<firecover_core::analytics::StationSummary>> {
    Ok(Json(ops::stations(&s.dataset, q.k)?))
}

async fn sd_series(State(s): Shared) -> AppResult<firecover_core::analytics::SdSeries> {
    Ok(Json(ops::sd(&s.dataset)?))
}

async fn grid(State(s): Shared, Query(q): Query<MonthQuery>) -> AppResult<ops::GridView> {
    let month = q
        .month
        .map(|m| m.parse::<YearMonth>())
        .transpose()
        .map_err(ServiceError::Core)?;
    Ok(Json(ops::grid_view(&s.dataset, month)?))
}

async fn grid_cell(
    State(s): Shared,
    Path((row, col)): Path<(usize, usize)>,
) -> AppResult<firecover_core::forecast::CellAttribution> {
    Ok(Json(ops::cell_attribution(&s.dataset, CellIndex::new(row, col))?))
}

async fn reachability(State(s): Shared, Query(q): Query<KQuery>) -> AppResult<Value> {
    let ds = s.dataset.clone();
    let v = tokio::task::spawn_blocking(move || ops::reachability(&ds, q.k)).await.map_err(join_error)??;
    Ok(Json(v))
}

async fn underserved(State(s): Shared, Query(q): Query<KQuery>) -> AppResult<firecover_core::mobility::UnderservedReport> {
    let ds = s.dataset.clone();
    let v = tokio::task::spawn_blocking(move || ops::underserved_cells(&ds, q.k)).await.map_err(join_error)??;
    Ok(Json(v))
}

async fn profile(
    State(s): Shared,
    Path(id): Path<String>,
    Query(q): Query<ProfileQuery>,
) -> AppResult<firecover_core::analytics::StationProfile> {
    Ok(Json(ops::profile(&s.dataset, &id, q.k, q.tod_width)?))
}

async fn evaluate(State(s): Shared, body: Bytes) -> AppResult<ops::EvaluateResponse> {
    let req: EvaluateRequest = decode(&body)?;
    Ok(Json(ops::evaluate(&s.dataset, &req)?))
}

fn join_error(e: tokio::task::JoinError) -> ServiceError {
    ServiceError::Unavailable(format!("worker task failed: {e}"))
}

/// Queues `work` on the blocking pool once a job permit is free and, for
/// optimize jobs, no earlier job on the same area is still active.
fn spawn_job<F>(state: Arc<AppState>, handle: &JobHandle, area_key: Option<String>, work: F)
where
    F: FnOnce(&Dataset, &dyn Fn(f64)) -> ServiceResult<JobOutput> + Send + 'static,
{
    let id = handle.id.clone();
    let gate = area_key.map(|k| state.jobs.area_gate(&k));
    tokio::spawn(async move {
        let _area = match &gate {
            Some(g) => Some(g.clone().lock_owned().await),
            None => None,
        };
        let _permit = state.jobs.permits().acquire_owned().await;
        state.jobs.mark_running(&id);
        let st = state.clone();
        let job_id = id.clone();
        let outcome = tokio::task::spawn_blocking(move || {
            let report = |p: f64| st.jobs.set_progress(&job_id, p);
            work(&st.dataset, &report)
        })
        .await
        .map_err(join_error)
        .and_then(|r| r);
        match &outcome {
            Ok(_) => info!(job = %id, "job done"),
            Err(e) => warn!(job = %id, error = %e, "job failed"),
        }
        state.jobs.finish(&id, outcome);
    });
}

async fn optimize(State(s): Shared, body: Bytes) -> ServiceResult<(StatusCode, Json<JobHandle>)> {
    let req: OptimizeRequest = decode(&body)?;
    req.prepare(&s.dataset)?;
    let area_key = serde_json::to_string(&req.area).map_err(firecover_core::Error::Json)?;
    let handle = s.jobs.create(JobKind::Optimize);
    spawn_job(s.clone(), &handle, Some(area_key), move |ds, report| {
        let pareto = ops::optimize(ds, &req, |done, total| report(done as f64 / total as f64))?;
        Ok(JobOutput::Pareto(pareto))
    });
    Ok((StatusCode::ACCEPTED, Json(handle)))
}

async fn simulate(State(s): Shared, body: Bytes) -> ServiceResult<(StatusCode, Json<JobHandle>)> {
    let req: SimulateRequest = decode(&body)?;
    req.prepare(&s.dataset)?;
    let handle = s.jobs.create(JobKind::Simulate);
    spawn_job(s.clone(), &handle, None, move |ds, report| {
        let result = ops::simulate(ds, &req, |done, total| report(done as f64 / total as f64))?;
        Ok(JobOutput::Simulation(result))
    });
    Ok((StatusCode::ACCEPTED, Json(handle)))
}

async fn list_jobs(State(s): Shared) -> Json<Vec<JobHandle>> {
    Json(s.jobs.list())
}

async fn job(State(s): Shared, Path(id): Path<String>) -> AppResult<JobHandle> {
    Ok(Json(s.jobs.get(&id)?))
}

async fn job_result(State(s): Shared, Path(id): Path<String>) -> AppResult<JobOutput> {
    Ok(Json(s.jobs.output(&id)?.as_ref().clone()))
}

async fn pareto(State(s): Shared, Path(id): Path<String>) -> AppResult<firecover_core::optimizer::ParetoResult> {
    match s.jobs.output(&id)?.as_ref() {
        JobOutput::Pareto(p) => Ok(Json(p.clone())),
        JobOutput::Simulation(_) => Err(ServiceError::BadRequest(format!("job {id} is not an optimize job"))),
    }
}

async fn schema_index() -> Json<Vec<&'static str>> {
    Json(schema::NAMES.to_vec())
}

async fn schema_by_name(Path(name): Path<String>) -> AppResult<Value> {
    schema::by_name(&name).map(Json).ok_or_else(|| ServiceError::NotFound(format!("schema {name:?}")))
}
