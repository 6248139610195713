//! HTTP job API under /v1/. Bodies are JSON.

use std::collections::BTreeMap;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use basinplan_core::basin::{fragmentation, Dam, Segment, SegmentId};
use basinplan_core::metrics::{is_known_metric, CUMULATIVE, FREE_FLOWING_KM};
use basinplan_core::optimizer::{apply_overrides, metric_table, solve, MetricRow, Overrides, Progress, SolveOptions};
use basinplan_core::Real;

use crate::error::{ErrorDoc, WbError};
use crate::store::{LedgerEntry, RunRecord, RunStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub state: JobState,
    pub parent: String,
    pub overrides: Overrides,
    pub submitted: DateTime<Utc>,
    pub started: Option<DateTime<Utc>>,
    pub finished: Option<DateTime<Utc>>,
    pub progress: Option<Progress>,
    /// Set once done.
    pub run_id: Option<String>,
    pub error: Option<ErrorDoc>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveRequest {
    /// Run the overrides apply to; the base run when absent.
    pub parent: Option<String>,
    pub overrides: Overrides,
}

/// Shared state behind the router.
pub struct Service {
    store: Mutex<RunStore>,
    base_run: String,
    options: SolveOptions,
    jobs: Mutex<BTreeMap<String, Job>>,
    queue: Mutex<mpsc::Sender<String>>,
}

impl Service {
    /// Starts the single solve worker. `base_run` must exist in `store`.
    pub fn start(store: RunStore, base_run: &str, options: SolveOptions) -> Result<Arc<Self>, WbError> {
        store.load(base_run)?;
        let (tx, rx) = mpsc::channel::<String>();
        let svc = Arc::new(Service {
            store: Mutex::new(store),
            base_run: base_run.into(),
            options,
            jobs: Mutex::new(BTreeMap::new()),
            queue: Mutex::new(tx),
        });
        let weak = Arc::downgrade(&svc);
        std::thread::Builder::new()
            .name("solve-worker".into())
            .spawn(move || {
                for job_id in rx {
                    let Some(svc) = weak.upgrade() else { break };
                    svc.run_job(&job_id);
                }
            })
            .map_err(|e| WbError::Store(format!("cannot start worker: {e}")))?;
        Ok(svc)
    }

    pub fn base_run(&self) -> &str {
        &self.base_run
    }

    fn load(&self, id: &str) -> Result<RunRecord, WbError> {
        self.store.lock().unwrap().load(id)
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut Job)) {
        if let Some(j) = self.jobs.lock().unwrap().get_mut(id) {
            f(j);
        }
    }

    /// Validates and queues a solve. The overrides are checked against the parent run here so
    /// the caller sees validation errors synchronously.
    pub fn submit(&self, req: SolveRequest) -> Result<Job, WbError> {
        let parent = req.parent.unwrap_or_else(|| self.base_run.clone());
        let rec = self.load(&parent)?;
        apply_overrides(&rec.problem, &req.overrides)?;
        let mut jobs = self.jobs.lock().unwrap();
        let job = Job {
            id: format!("job-{:04}", jobs.len() + 1),
            state: JobState::Queued,
            parent,
            overrides: req.overrides,
            submitted: Utc::now(),
            started: None,
            finished: None,
            progress: None,
            run_id: None,
            error: None,
        };
        jobs.insert(job.id.clone(), job.clone());
        self.queue.lock().unwrap().send(job.id.clone()).map_err(|_| WbError::Store("solve worker stopped".into()))?;
        Ok(job)
    }

    pub fn job(&self, id: &str) -> Option<Job> {
        self.jobs.lock().unwrap().get(id).cloned()
    }

    fn run_job(&self, id: &str) {
        let Some(job) = self.job(id) else { return };
        self.update(id, |j| {
            j.state = JobState::Running;
            j.started = Some(Utc::now());
        });
        log::info!("{id}: solving from {}", job.parent);
        let result = self.solve_job(&job);
        self.update(id, |j| {
            j.finished = Some(Utc::now());
            match result {
                Ok(run) => {
                    log::info!("{id}: stored {run}");
                    j.state = JobState::Done;
                    j.run_id = Some(run);
                }
                Err(e) => {
                    log::warn!("{id}: {e}");
                    j.state = JobState::Failed;
                    j.error = Some(e.doc());
                }
            }
        });
    }

    fn solve_job(&self, job: &Job) -> Result<String, WbError> {
        let created = Utc::now();
        let parent = self.load(&job.parent)?;
        let problem = apply_overrides(&parent.problem, &job.overrides)?;
        let report = |p: &Progress| self.update(&job.id, |j| j.progress = Some(p.clone()));
        let pool = solve(&problem, &self.options, Some(&report))?;
        let store = self.store.lock().unwrap();
        let run = store.next_id()?;
        let rec = RunRecord::derived(&parent, &run, job.overrides.clone(), problem, pool, created);
        store.commit(&rec)?;
        Ok(run)
    }
}

struct ApiError(StatusCode, ErrorDoc);

impl From<WbError> for ApiError {
    fn from(e: WbError) -> Self {
        let code = match &e {
            WbError::NotFound(_) => StatusCode::NOT_FOUND,
            e if e.is_validation() => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.doc())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Default, Deserialize)]
struct RunQuery {
    run: Option<String>,
}

#[derive(Serialize)]
struct Bound {
    min: Real,
    max: Option<Real>,
}

#[derive(Serialize)]
struct Controls {
    energy_price: Bound,
    capacity_price: Bound,
    min_free_flowing: Bound,
    /// Metric ids a bound may be placed on.
    metrics: Vec<&'static str>,
    variants: Vec<String>,
}

#[derive(Serialize)]
struct NetworkDoc {
    run_id: String,
    segments: Vec<Segment>,
    /// Per-segment y with no dams.
    baseline_fragmented: BTreeMap<SegmentId, bool>,
    baseline_free_flowing_km: Real,
    controls: Controls,
}

async fn network(State(s): State<Arc<Service>>, Query(q): Query<RunQuery>) -> ApiResult<NetworkDoc> {
    let id = q.run.unwrap_or_else(|| s.base_run.clone());
    let rec = s.load(&id)?;
    let net = &rec.problem.network;
    let baseline = fragmentation(net, &[]).map_err(WbError::from)?;
    let total = net.baseline_free_flowing_length();
    let mut metrics: Vec<&'static str> = CUMULATIVE.to_vec();
    metrics.push(FREE_FLOWING_KM);
    debug_assert!(metrics.iter().all(|m| is_known_metric(m)));
    Ok(Json(NetworkDoc {
        run_id: id,
        segments: net.segments().to_vec(),
        baseline_fragmented: baseline.fragmented,
        baseline_free_flowing_km: total,
        controls: Controls {
            energy_price: Bound { min: 0.0, max: None },
            capacity_price: Bound { min: 0.0, max: None },
            min_free_flowing: Bound { min: 0.0, max: Some(total) },
            metrics,
            variants: rec.meta.candidates.clone(),
        },
    }))
}

async fn candidates(State(s): State<Arc<Service>>, Query(q): Query<RunQuery>) -> ApiResult<serde_json::Value> {
    let id = q.run.unwrap_or_else(|| s.base_run.clone());
    let rec = s.load(&id)?;
    Ok(Json(serde_json::json!({ "run_id": id, "candidates": rec.problem.variants })))
}

async fn submit(State(s): State<Arc<Service>>, body: Bytes) -> Result<(StatusCode, Json<Job>), ApiError> {
    let req: SolveRequest = if body.iter().all(u8::is_ascii_whitespace) {
        SolveRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, WbError::format("solve request", e).doc()))?
    };
    // validation reads the store; keep it off the async workers
    let job = tokio::task::spawn_blocking(move || s.submit(req)).await.map_err(|e| ApiError::from(WbError::Store(e.to_string())))??;
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn job(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Job> {
    s.job(&id).map(Json).ok_or_else(|| WbError::NotFound(format!("job {id}")).into())
}

#[derive(Serialize)]
struct RunSummary {
    id: String,
    parent: Option<String>,
    created: DateTime<Utc>,
    completed: DateTime<Utc>,
    status: basinplan_core::optimizer::SolveStatus,
    incumbent_objective: Option<Real>,
    overrides: Overrides,
    ledger: Vec<LedgerEntry>,
}

fn summary(rec: &RunRecord) -> RunSummary {
    let m = &rec.meta;
    RunSummary {
        id: m.id.clone(),
        parent: m.parent.clone(),
        created: m.created,
        completed: m.completed,
        status: m.status,
        incumbent_objective: m.incumbent_objective,
        overrides: m.overrides.clone(),
        ledger: m.ledger.clone(),
    }
}

async fn runs(State(s): State<Arc<Service>>) -> ApiResult<Vec<RunSummary>> {
    let store = s.store.lock().unwrap();
    let mut out = Vec::new();
    for id in store.list()? {
        out.push(summary(&store.load(&id)?));
    }
    Ok(Json(out))
}

async fn run(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<RunSummary> {
    Ok(Json(summary(&s.load(&id)?)))
}

#[derive(Serialize)]
struct PoolEntry {
    index: usize,
    objective: Real,
    selected: Vec<String>,
}

#[derive(Serialize)]
struct PoolDoc {
    run_id: String,
    status: basinplan_core::optimizer::SolveStatus,
    gap: Real,
    best_bound: Real,
    nodes: usize,
    alternatives: Vec<PoolEntry>,
    metric_table: Vec<MetricRow>,
}

async fn pool(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<PoolDoc> {
    let rec = s.load(&id)?;
    let p = &rec.pool;
    Ok(Json(PoolDoc {
        run_id: id,
        status: p.status,
        gap: p.gap,
        best_bound: p.best_bound,
        nodes: p.nodes,
        alternatives: p
            .alternatives
            .iter()
            .enumerate()
            .map(|(index, a)| PoolEntry { index, objective: a.objective, selected: a.selected.clone() })
            .collect(),
        metric_table: metric_table(&rec.problem, &p.alternatives),
    }))
}

#[derive(Serialize)]
struct ProjectSummary {
    variant_id: String,
    segment_id: SegmentId,
    passable: bool,
    installed_mw: Real,
    /// kWh/yr, probability weighted.
    expected_energy_kwh: Real,
    /// Mean over months, per scenario.
    mean_turbine_m3s: Vec<Real>,
    mean_spill_m3s: Vec<Real>,
    /// Largest start-of-month storage per scenario, m³.
    peak_storage_m3: Vec<Real>,
}

#[derive(Serialize)]
struct AlternativeDoc {
    run_id: String,
    index: usize,
    objective: Real,
    selected: Vec<String>,
    dams: Vec<Dam>,
    /// Per-segment y.
    fragmented: BTreeMap<SegmentId, bool>,
    metrics: BTreeMap<String, Real>,
    satisfaction: Option<basinplan_core::optimizer::SatisfactionValues>,
    projects: Vec<ProjectSummary>,
}

fn mean(v: &[Real]) -> Real {
    v.iter().sum::<Real>() / v.len().max(1) as Real
}

async fn alternative(State(s): State<Arc<Service>>, Path((id, k)): Path<(String, usize)>) -> ApiResult<AlternativeDoc> {
    let rec = s.load(&id)?;
    let alt = rec.pool.alternatives.get(k).ok_or_else(|| WbError::NotFound(format!("alternative {k} of run {id}")))?;
    let variant = |vid: &str| rec.problem.variants.iter().find(|v| v.id == vid);
    let mut dams = Vec::new();
    let mut projects = Vec::new();
    for d in &alt.dispatch {
        let Some(v) = variant(&d.variant_id) else { continue };
        dams.push(Dam::new(v.segment_id.clone(), v.passable));
        projects.push(ProjectSummary {
            variant_id: v.id.clone(),
            segment_id: v.segment_id.clone(),
            passable: v.passable,
            installed_mw: v.installed_mw(),
            expected_energy_kwh: alt.energy_kwh.get(&v.id).copied().unwrap_or(0.0),
            mean_turbine_m3s: d.scenarios.iter().map(|s| mean(&s.turbine_m3s)).collect(),
            mean_spill_m3s: d.scenarios.iter().map(|s| mean(&s.spill_m3s)).collect(),
            peak_storage_m3: d.scenarios.iter().map(|s| s.storage_m3.iter().copied().fold(0.0, Real::max)).collect(),
        });
    }
    Ok(Json(AlternativeDoc {
        run_id: id,
        index: k,
        objective: alt.objective,
        selected: alt.selected.clone(),
        dams,
        fragmented: alt.fragmented.clone(),
        metrics: alt.metrics.clone(),
        satisfaction: alt.satisfaction.clone(),
        projects,
    }))
}

async fn fallback() -> ApiError {
    WbError::NotFound("no such endpoint".into()).into()
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/v1/network", get(network))
        .route("/v1/candidates", get(candidates))
        .route("/v1/solve", post(submit))
        .route("/v1/jobs/{id}", get(job))
        .route("/v1/runs", get(runs))
        .route("/v1/runs/{id}", get(run))
        .route("/v1/runs/{id}/pool", get(pool))
        .route("/v1/runs/{id}/alternatives/{k}", get(alternative))
        .fallback(fallback)
        .with_state(service)
}
