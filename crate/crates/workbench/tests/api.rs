use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::Utc;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use basinplan_core::basin::{fragmentation, Dam};
use basinplan_core::optimizer::solve;
use basinplan_workbench::api::{router, Service};
use basinplan_workbench::stages::Context;
use basinplan_workbench::{PlanningConfig, RunRecord, RunStore};

fn setup() -> (tempfile::TempDir, Arc<Service>) {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/basin40/config.toml");
    let cfg = PlanningConfig::load(&cfg_path, &[]).unwrap();
    let problem = Context::new(cfg.clone()).unwrap().problem().unwrap();
    let pool = solve(&problem, &cfg.solver, None).unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    store.commit(&RunRecord::base("run-0001", cfg.snapshot().unwrap(), problem, pool, Utc::now())).unwrap();
    let options = cfg.solver.clone();
    let svc = Service::start(store, "run-0001", options).unwrap();
    (dir, svc)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

async fn wait_done(app: &Router, job: &str) -> Value {
    for _ in 0..600 {
        let (s, v) = call(app, "GET", &format!("/v1/jobs/{job}"), None).await;
        assert_eq!(s, StatusCode::OK);
        match v["state"].as_str().unwrap() {
            "done" | "failed" => return v,
            "queued" | "running" => tokio::time::sleep(Duration::from_millis(50)).await,
            other => panic!("state {other}"),
        }
    }
    panic!("job {job} did not finish");
}

#[tokio::test]
async fn network_carries_baseline_and_control_bounds() {
    let (_d, svc) = setup();
    let app = router(svc);
    let (s, v) = call(&app, "GET", "/v1/network", None).await;
    assert_eq!(s, StatusCode::OK);
    let segs = v["segments"].as_array().unwrap();
    assert_eq!(segs.len(), 15);
    let total: f64 = segs.iter().map(|s| s["length_km"].as_f64().unwrap()).sum();
    assert!((v["baseline_free_flowing_km"].as_f64().unwrap() - total).abs() < 1e-9);
    assert!(v["baseline_fragmented"].as_object().unwrap().values().all(|f| f == false));
    assert_eq!(v["controls"]["min_free_flowing"]["max"], v["baseline_free_flowing_km"]);
    assert_eq!(v["controls"]["variants"].as_array().unwrap().len(), 40);

    let (s, c) = call(&app, "GET", "/v1/candidates", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(c["candidates"].as_array().unwrap().len(), 40);
}

#[tokio::test]
async fn lower_energy_price_gives_a_linked_run_with_no_more_revenue() {
    let (_d, svc) = setup();
    let app = router(svc);
    let (_, base) = call(&app, "GET", "/v1/runs/run-0001", None).await;
    let base_obj = base["incumbent_objective"].as_f64().unwrap();

    let (s, job) = call(&app, "POST", "/v1/solve", Some(json!({ "overrides": { "energy_price": 0.03 } }))).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    assert_eq!(job["state"], "queued");
    let done = wait_done(&app, job["id"].as_str().unwrap()).await;
    assert_eq!(done["state"], "done", "{done}");
    assert!(done["progress"]["incumbents"].as_u64().unwrap() >= 1);
    let run_id = done["run_id"].as_str().unwrap().to_string();

    let (s, run) = call(&app, "GET", &format!("/v1/runs/{run_id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(run["parent"], "run-0001");
    let obj = run["incumbent_objective"].as_f64().unwrap();
    assert!(obj <= base_obj);
    let entry = &run["ledger"][0];
    assert_eq!(entry["parent_id"], "run-0001");
    assert_eq!(entry["run_id"], run_id.as_str());
    assert!((entry["revenue_delta"].as_f64().unwrap() - (obj - base_obj)).abs() < 1e-6);

    let (s, pool) = call(&app, "GET", &format!("/v1/runs/{run_id}/pool"), None).await;
    assert_eq!(s, StatusCode::OK);
    let alts = pool["alternatives"].as_array().unwrap();
    assert_eq!(pool["metric_table"].as_array().unwrap().len(), alts.len());
    for w in alts.windows(2) {
        assert!(w[1]["objective"].as_f64().unwrap() > w[0]["objective"].as_f64().unwrap());
    }

    // y per segment agrees with the dams of the alternative
    let (_, net) = call(&app, "GET", "/v1/network", None).await;
    let segments: Vec<basinplan_core::basin::Segment> = serde_json::from_value(net["segments"].clone()).unwrap();
    let network = basinplan_core::basin::RiverNetwork::new(segments).unwrap();
    let k = alts.len() - 1;
    let (s, alt) = call(&app, "GET", &format!("/v1/runs/{run_id}/alternatives/{k}"), None).await;
    assert_eq!(s, StatusCode::OK);
    let dams: Vec<Dam> = serde_json::from_value(alt["dams"].clone()).unwrap();
    let y = fragmentation(&network, &dams).unwrap();
    assert_eq!(serde_json::to_value(&y.fragmented).unwrap(), alt["fragmented"]);
    assert_eq!(alt["projects"].as_array().unwrap().len(), alt["selected"].as_array().unwrap().len());
}

#[tokio::test]
async fn jobs_run_one_at_a_time_in_order() {
    let (_d, svc) = setup();
    let app = router(svc);
    let (_, a) = call(&app, "POST", "/v1/solve", Some(json!({ "overrides": { "energy_price": 0.035 } }))).await;
    let (_, b) = call(&app, "POST", "/v1/solve", Some(json!({ "parent": "run-0001", "overrides": { "min_free_flowing": 100.0 } }))).await;
    let a = wait_done(&app, a["id"].as_str().unwrap()).await;
    let b = wait_done(&app, b["id"].as_str().unwrap()).await;
    assert_eq!(a["run_id"], "run-0002");
    assert_eq!(b["run_id"], "run-0003");
    let a_end: chrono::DateTime<Utc> = serde_json::from_value(a["finished"].clone()).unwrap();
    let b_start: chrono::DateTime<Utc> = serde_json::from_value(b["started"].clone()).unwrap();
    assert!(b_start >= a_end);

    // chaining from a what-if run extends its ledger
    let (_, c) = call(&app, "POST", "/v1/solve", Some(json!({ "parent": "run-0003", "overrides": { "min_free_flowing": 150.0 } }))).await;
    let c = wait_done(&app, c["id"].as_str().unwrap()).await;
    let (_, run) = call(&app, "GET", &format!("/v1/runs/{}", c["run_id"].as_str().unwrap()), None).await;
    let ledger = run["ledger"].as_array().unwrap();
    assert_eq!(ledger.len(), 2);
    assert_eq!(ledger[0]["run_id"], "run-0003");
    assert_eq!(ledger[1]["parent_id"], "run-0003");

    let (_, runs) = call(&app, "GET", "/v1/runs", None).await;
    assert_eq!(runs.as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn bad_requests_are_rejected_with_the_module_message() {
    let (_d, svc) = setup();
    let app = router(svc);
    let (s, e) = call(&app, "POST", "/v1/solve", Some(json!({ "overrides": { "min_free_flowing": 1.0e6 } }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["kind"], "optimizer");
    assert!(e["message"].as_str().unwrap().contains("exceeds the baseline"));

    let (s, e) = call(&app, "POST", "/v1/solve", Some(json!({ "overrides": { "forbid": ["nope"] } }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(e["message"].as_str().unwrap().contains("nope"));

    let (s, _) = call(&app, "POST", "/v1/solve", Some(json!({ "overrides": { "energy_price": -1.0 } }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let (s, e) = call(&app, "POST", "/v1/solve", Some(json!({ "overrides": { "bogus": 1 } }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(e["kind"], "format");

    let (s, _) = call(&app, "POST", "/v1/solve", Some(json!({ "parent": "run-9999" }))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, jobs) = call(&app, "GET", "/v1/jobs/job-0001", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND, "rejected requests must not queue: {jobs}");
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let (_d, svc) = setup();
    let app = router(svc);
    for uri in [
        "/v1/runs/run-9999/pool",
        "/v1/runs/run-9999",
        "/v1/runs/run-0001/alternatives/999",
        "/v1/runs/..%2F..%2Fetc/pool",
        "/v1/jobs/job-0042",
        "/v1/network?run=zzz",
        "/v1/nothing",
    ] {
        let (s, v) = call(&app, "GET", uri, None).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(v["status"], "error");
    }
}

#[tokio::test]
async fn completed_runs_are_not_rewritten() {
    let (dir, svc) = setup();
    let app = router(svc);
    let before = std::fs::read(dir.path().join("run-0001/pool.json")).unwrap();
    let (_, job) = call(&app, "POST", "/v1/solve", Some(json!({ "overrides": { "capacity_price": 50.0 } }))).await;
    wait_done(&app, job["id"].as_str().unwrap()).await;
    assert_eq!(std::fs::read(dir.path().join("run-0001/pool.json")).unwrap(), before);
    assert!(std::fs::metadata(dir.path().join("run-0002/run.json")).unwrap().permissions().readonly());

    let store = RunStore::open(dir.path()).unwrap();
    let rec = store.load("run-0002").unwrap();
    assert!(store.commit(&rec).is_err());
}
