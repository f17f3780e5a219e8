use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use testbed_controller::{router, AppState, ControllerConfig, DelayBatch, ExperimentState};
use testbed_core::evalkit::{Metric, RunSummary};
use testbed_core::topo::canonical_diamond;
use tower::ServiceExt;

fn app() -> Router {
    router(AppState::new(ControllerConfig::default()))
}

async fn call(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(body.into())
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, "GET", uri, Body::empty()).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", uri, body.to_string()).await
}

async fn diamond(app: &Router) -> String {
    let (status, body) = call(app, "POST", "/topology", canonical_diamond().to_json()).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body["id"].as_str().unwrap().to_string()
}

/// Poll until the experiment leaves pending/running, recording every state seen.
async fn wait_done(app: &Router, id: &str) -> Vec<ExperimentState> {
    let deadline = Instant::now() + Duration::from_secs(120);
    let mut seen = Vec::new();
    loop {
        let (status, h) = get(app, &format!("/experiments/{id}")).await;
        assert_eq!(status, StatusCode::OK);
        let state: ExperimentState = serde_json::from_value(h["state"].clone()).unwrap();
        if seen.last() != Some(&state) {
            seen.push(state);
        }
        if matches!(state, ExperimentState::Done | ExperimentState::Failed) {
            return seen;
        }
        assert!(Instant::now() < deadline, "experiment {id} did not finish");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

fn assert_forward_only(states: &[ExperimentState]) {
    let order = |s: &ExperimentState| match s {
        ExperimentState::Pending => 0,
        ExperimentState::Running => 1,
        ExperimentState::Done | ExperimentState::Failed => 2,
    };
    assert!(states.windows(2).all(|w| order(&w[0]) < order(&w[1])), "{states:?}");
}

#[tokio::test]
async fn diamond_is_stored_and_compiled() {
    let app = app();
    let (status, body) = call(&app, "POST", "/topology", canonical_diamond().to_json()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["report"]["node_count"], 6);
    assert_eq!(body["report"]["link_count"], 6);
    assert_eq!(body["report"]["connected"], true);
    let id = body["id"].as_str().unwrap();

    let (status, configs) = get(&app, &format!("/topology/{id}/configs")).await;
    assert_eq!(status, StatusCode::OK);
    let configs = configs.as_array().unwrap();
    assert_eq!(configs.len(), 6);
    assert_eq!(configs[0]["node"]["label"], "C0");
    assert_eq!(configs[0]["address"], "10.0.0.10");

    let (status, view) = get(&app, &format!("/topology/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    let stored: Value = serde_json::from_str(&canonical_diamond().to_json()).unwrap();
    assert_eq!(view["topology"], stored);

    let (status, body) = get(&app, "/topology/topo-9999/configs").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_topology");
}

#[tokio::test]
async fn bad_topologies_are_rejected() {
    let app = app();
    let asymmetric = json!({ "matrix": [[null, 1.0], [2.0, null]] });
    let (status, body) = post(&app, "/topology", asymmetric).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "asymmetric");

    let (status, body) = call(&app, "POST", "/topology", "").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "empty_body");

    let (status, body) = call(&app, "POST", "/topology", "{not json").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "malformed");
}

#[tokio::test]
async fn experiment_submission_errors() {
    let app = app();
    let id = diamond(&app).await;
    let (status, body) = post(&app, "/experiments", json!({ "topology_id": "topo-0404", "consumer": "C0", "producer": "P1" })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_topology");

    let (status, body) = post(
        &app,
        "/experiments",
        json!({ "topology_id": id, "consumer": "C0", "producer": "P1", "strategy": "flooding" }),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "unknown_strategy");

    let (status, body) = post(&app, "/experiments", json!({ "topology_id": id, "consumer": "C0", "producer": "Z9" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "unknown_node");

    let (status, _) = post(&app, "/experiments", json!({ "consumer": "C0", "producer": "P1" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = get(&app, "/experiments/exp-0404").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_experiment");
}

#[tokio::test]
async fn twenty_repetitions_run_to_completion() {
    let app = app();
    let id = diamond(&app).await;
    let spec = json!({
        "topology_id": id,
        "consumer": "C0",
        "producer": "P1",
        "strategy": "best_route",
        "duration_s": 3.0,
        "failures": [{ "link": ["R3", "R4"], "at_s": 1.5 }],
        "repetitions": 20,
        // half real time, so the run is still going when metrics are asked for
        "pace": 2.0,
    });
    let (status, handle) = post(&app, "/experiments", spec).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{handle}");
    assert_eq!(handle["state"], "pending");
    assert_eq!(handle["spec"]["repetitions"], 20);
    let exp = handle["id"].as_str().unwrap().to_string();

    let (status, body) = get(&app, &format!("/experiments/{exp}/metrics")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "not_done");

    let states = wait_done(&app, &exp).await;
    assert_forward_only(&states);
    assert_eq!(states.last(), Some(&ExperimentState::Done));

    let (status, metrics) = get(&app, &format!("/experiments/{exp}/metrics")).await;
    assert_eq!(status, StatusCode::OK);
    let summaries: Vec<RunSummary> = serde_json::from_value(metrics).unwrap();
    assert_eq!(summaries.len(), 20);
    for (r, s) in summaries.iter().enumerate() {
        assert_eq!(s.repetition as usize, r);
        assert!(s.verify());
    }

    let (status, csv) = get(&app, &format!("/experiments/{exp}/csv")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(csv.as_str().unwrap().contains("rep-019/C0"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn failing_a_link_mid_run_collapses_best_route() {
    let app = app();
    let id = diamond(&app).await;
    let spec = json!({
        "topology_id": id,
        "consumer": "C0",
        "producer": "P1",
        "strategy": "best_route",
        "duration_s": 8.0,
        "repetitions": 3,
        "pace": 4.0,
    });
    let (_, handle) = post(&app, "/experiments", spec).await;
    let exp = handle["id"].as_str().unwrap().to_string();
    // the reference repetition needs about 2 s of wall time; fail the link around 2-4 s in
    let deadline = Instant::now() + Duration::from_secs(30);
    loop {
        let (_, h) = get(&app, &format!("/experiments/{exp}")).await;
        if h["state"] == "running" {
            break;
        }
        assert!(Instant::now() < deadline);
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    tokio::time::sleep(Duration::from_millis(700)).await;
    let (status, body) = post(&app, "/links/R4/R3/state", json!({ "up": false })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["link"], "R3-R4");
    let at = body["applied"][0]["at_s"].as_f64().expect("applied while running");
    assert!(at > 0.5 && at < 6.0, "failure at {at}");

    let states = wait_done(&app, &exp).await;
    assert_eq!(states.last(), Some(&ExperimentState::Done));
    let (_, h) = get(&app, &format!("/experiments/{exp}")).await;
    assert_eq!(h["injections"], json!([{ "link": "R3-R4", "up": false, "at_s": at }]));

    let (_, metrics) = get(&app, &format!("/experiments/{exp}/metrics")).await;
    let summaries: Vec<RunSummary> = serde_json::from_value(metrics).unwrap();
    assert_eq!(summaries.len(), 3);
    for s in &summaries {
        // windows around the injected failure
        assert_eq!(s.windows.len(), 3);
        let (before, after) = (s.windows[1], s.windows[2]);
        assert_eq!(before.1, at);
        let mean = |w| s.aggregate(Metric::ThroughputMbps, "C0", w).unwrap().mean.unwrap();
        assert!(mean(after) < 0.2 * mean(before), "{} vs {}", mean(after), mean(before));
    }
}

#[tokio::test]
async fn link_state_without_a_session() {
    let app = app();
    let (status, body) = post(&app, "/links/R3/R4/state", json!({ "up": false })).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "no topology yet");
    assert_eq!(body["error"], "unknown_link");

    diamond(&app).await;
    for _ in 0..2 {
        let (status, body) = post(&app, "/links/R3/R4/state", json!({ "up": true })).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body["applied"], json!([]));
    }
    // R1 and R4 are not adjacent
    let (status, _) = post(&app, "/links/R1/R4/state", json!({ "up": false })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = post(&app, "/links/R3/Q7/state", json!({ "up": false })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/links/R3/R4/state", "").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn delay_stream_ends_at_once_when_idle() {
    let app = app();
    let req = Request::get("/links/delays").body(Body::empty()).unwrap();
    let res = app.oneshot(req).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(res.headers()["content-type"], "text/event-stream");
    let body = tokio::time::timeout(Duration::from_secs(5), res.into_body().collect())
        .await
        .expect("stream ends")
        .unwrap()
        .to_bytes();
    assert!(body.is_empty());
}

/// Data payloads of the next `delays` event.
async fn next_batch(body: &mut Body) -> Option<DelayBatch> {
    loop {
        let frame = tokio::time::timeout(Duration::from_secs(10), body.frame())
            .await
            .expect("a batch within 10 s")?
            .unwrap();
        let Ok(data) = frame.into_data() else { continue };
        let text = String::from_utf8(data.to_vec()).unwrap();
        if let Some(line) = text.lines().find_map(|l| l.strip_prefix("data: ")) {
            return Some(serde_json::from_str(line).unwrap());
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn idle_probing_streams_batches_and_losses() {
    let app = app();
    let id = diamond(&app).await;
    let (status, _) = post(&app, &format!("/probe/{id}"), json!({ "interval_ms": 50 })).await;
    assert_eq!(status, StatusCode::OK);

    let req = Request::get("/links/delays").body(Body::empty()).unwrap();
    let mut body = app.clone().oneshot(req).await.unwrap().into_body();
    let first = next_batch(&mut body).await.unwrap();
    assert_eq!(first.links.len(), 6);
    let r3r4 = first.links.iter().find(|l| l.link == "R3-R4").unwrap();
    assert_eq!(r3r4.delay_ms, Some(10.0));
    let second = next_batch(&mut body).await.unwrap();
    assert_eq!(second.round, first.round + 1);

    let (status, change) = post(&app, "/links/R3/R4/state", json!({ "up": false })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(change["applied"][0]["target"], "probe");
    let mut saw_loss = false;
    for _ in 0..10 {
        let batch = next_batch(&mut body).await.unwrap();
        if batch.links.iter().any(|l| l.link == "R3-R4" && l.delay_ms.is_none()) {
            saw_loss = true;
            break;
        }
    }
    assert!(saw_loss, "failed link shows up as a loss");

    let (status, stopped) = call(&app, "DELETE", "/probe", Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stopped["stopped"], true);
    // drain whatever was in flight; the stream must then end
    let deadline = Instant::now() + Duration::from_secs(5);
    while next_batch(&mut body).await.is_some() {
        assert!(Instant::now() < deadline);
    }

    let (status, _) = post(&app, "/probe/topo-0404", json!({})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn run_directory_is_written_under_the_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let config = ControllerConfig {
        data_dir: Some(dir.path().to_path_buf()),
        ..ControllerConfig::default()
    };
    let app = router(AppState::new(config));
    let id = diamond(&app).await;
    let spec = json!({ "topology_id": id, "consumer": "C0", "producer": "P1", "duration_s": 1.0, "repetitions": 2 });
    let (_, handle) = post(&app, "/experiments", spec).await;
    let exp = handle["id"].as_str().unwrap();
    wait_done(&app, exp).await;

    let root = dir.path().join("runs").join(exp);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(root.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["repetitions"].as_array().unwrap().len(), 2);
    assert!(root.join("rep-001").join("C0.log").exists());
    let (_, csv) = get(&app, &format!("/experiments/{exp}/csv")).await;
    assert_eq!(std::fs::read_to_string(root.join("metrics.csv")).unwrap(), csv.as_str().unwrap());
}

#[tokio::test]
async fn leases_and_logs_are_readable() {
    let state = AppState::new(ControllerConfig::default());
    {
        use std::net::{IpAddr, Ipv4Addr};
        use testbed_core::logrepo::{Severity, SyslogRecord};
        let mut logs = state.logs().write().unwrap();
        for k in 0..5 {
            let rec = SyslogRecord::new(20, Severity::INFO, "C0", "consumer", &format!("rtt /x/{k} 24.000"));
            logs.ingest(rec, IpAddr::V4(Ipv4Addr::new(10, 0, 0, 10)), k);
        }
    }
    let app = router(state);
    let (status, leases) = get(&app, "/leases").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(leases, json!([]));

    let (status, logs) = get(&app, "/logs?app=consumer&limit=2").await;
    assert_eq!(status, StatusCode::OK);
    let logs = logs.as_array().unwrap();
    assert_eq!(logs.len(), 2);
    assert_eq!(logs[1]["received_at"], 4);
    let (status, _) = get(&app, "/logs?start=5&end=1").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}
