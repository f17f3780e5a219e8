use std::convert::Infallible;
use std::net::IpAddr;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::IntoResponse;
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use testbed_core::discovery::{emit_provisioning_plan, LeaseRecord, ProvisioningPlan};
use testbed_core::emulator::{parse_experiment_spec, DEFAULT_PROBE_INTERVAL_S};
use testbed_core::evalkit::{export_runs_csv, RunSummary};
use testbed_core::logrepo::{LogEntry, LogQuery, Severity};
use testbed_core::topo::{
    parse_adjacency, AdjacencyDocument, NodeConfig, Topology, ValidationReport,
};
use testbed_core::SimTime;
use tokio::sync::broadcast;

use crate::error::ApiError;
use crate::probe::ProbeSession;
use crate::state::{AppState, ExperimentHandle, ExperimentState, LinkInjection};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/topology", post(post_topology).get(list_topologies))
        .route("/topology/{id}", get(get_topology))
        .route("/topology/{id}/configs", get(get_configs))
        .route("/topology/{id}/plans", get(get_plans))
        .route("/experiments", post(post_experiment).get(list_experiments))
        .route("/experiments/{id}", get(get_experiment))
        .route("/experiments/{id}/metrics", get(get_metrics))
        .route("/experiments/{id}/csv", get(get_csv))
        .route("/links/delays", get(link_delays))
        .route("/links/{a}/{b}/state", post(post_link_state))
        .route("/probe/{topology_id}", post(start_probe))
        .route("/probe", delete(stop_probe))
        .route("/leases", get(get_leases))
        .route("/logs", get(get_logs))
        .with_state(state)
}

fn body_text(body: &Bytes) -> Result<&str, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Err(ApiError::EmptyBody);
    }
    std::str::from_utf8(body).map_err(|e| ApiError::Malformed(e.to_string()))
}

fn malformed(e: impl ToString) -> ApiError {
    ApiError::Malformed(e.to_string())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TopologyCreated {
    pub id: String,
    pub report: ValidationReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TopologyView {
    pub id: String,
    pub topology: AdjacencyDocument,
    pub report: ValidationReport,
}

async fn post_topology(
    State(st): State<AppState>,
    body: Bytes,
) -> Result<Json<TopologyCreated>, ApiError> {
    let topology = parse_adjacency(body_text(&body)?)?;
    let stored = st.add_topology(topology);
    Ok(Json(TopologyCreated {
        id: stored.id.clone(),
        report: stored.report.clone(),
    }))
}

async fn list_topologies(State(st): State<AppState>) -> Json<Vec<TopologyCreated>> {
    Json(
        st.topologies()
            .iter()
            .map(|t| TopologyCreated {
                id: t.id.clone(),
                report: t.report.clone(),
            })
            .collect(),
    )
}

async fn get_topology(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<TopologyView>, ApiError> {
    let t = st.topology(&id).ok_or(ApiError::UnknownTopology(id))?;
    Ok(Json(TopologyView {
        id: t.id.clone(),
        topology: t.topology.to_document(),
        report: t.report.clone(),
    }))
}

async fn get_configs(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Vec<NodeConfig>>, ApiError> {
    let t = st.topology(&id).ok_or(ApiError::UnknownTopology(id))?;
    Ok(Json(t.configs.clone()))
}

/// Plans for every leased node whose address belongs to this topology.
async fn get_plans(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Vec<ProvisioningPlan>>, ApiError> {
    let t = st.topology(&id).ok_or(ApiError::UnknownTopology(id))?;
    let sink = st.config().log_sink;
    let leases = st.leases().read().unwrap_or_else(|e| e.into_inner());
    let plans = leases
        .leases()
        .filter_map(|lease| {
            let config = t.configs.iter().find(|c| c.address == lease.ip)?;
            Some(emit_provisioning_plan(lease, config, sink))
        })
        .collect();
    Ok(Json(plans))
}

async fn post_experiment(
    State(st): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<ExperimentHandle>), ApiError> {
    let value: Value = serde_json::from_str(body_text(&body)?).map_err(malformed)?;
    let Value::Object(mut doc) = value else {
        return Err(malformed("expected a JSON object"));
    };
    let topology_id = match doc.remove("topology_id") {
        Some(Value::String(id)) => id,
        Some(_) => return Err(malformed("topology_id must be a string")),
        None => return Err(malformed("missing topology_id")),
    };
    let pace = match doc.remove("pace") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_f64()
                .filter(|p| p.is_finite() && *p > 0.0)
                .ok_or_else(|| malformed("pace must be a positive number"))?,
        ),
    };
    if doc.contains_key("topology") {
        return Err(malformed("refer to a stored topology with topology_id"));
    }
    let stored = st
        .topology(&topology_id)
        .ok_or_else(|| ApiError::UnknownTopology(topology_id.clone()))?;
    let topology = serde_json::to_value(stored.topology.to_document()).map_err(malformed)?;
    doc.insert("topology".into(), topology);
    let spec = parse_experiment_spec(&Value::Object(doc).to_string())?;
    let handle = st
        .submit(topology_id, spec, pace)
        .map_err(|_| ApiError::WorkerGone)?;
    Ok((StatusCode::ACCEPTED, Json(handle)))
}

async fn list_experiments(State(st): State<AppState>) -> Json<Vec<ExperimentHandle>> {
    Json(st.experiments())
}

async fn get_experiment(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ExperimentHandle>, ApiError> {
    st.experiment(&id)
        .map(Json)
        .ok_or(ApiError::UnknownExperiment(id))
}

fn finished_summaries(st: &AppState, id: String) -> Result<std::sync::Arc<Vec<RunSummary>>, ApiError> {
    let (handle, summaries) = st.summaries(&id).ok_or(ApiError::UnknownExperiment(id))?;
    match summaries {
        Some(s) if handle.state == ExperimentState::Done => Ok(s),
        _ => Err(ApiError::NotDone(handle.state)),
    }
}

async fn get_metrics(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Vec<RunSummary>>, ApiError> {
    Ok(Json(finished_summaries(&st, id)?.as_ref().clone()))
}

async fn get_csv(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let summaries = finished_summaries(&st, id)?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], export_runs_csv(&summaries)))
}

/// One `delays` event per probe round of the running experiment, or else of
/// the idle probe session. Ends at once when neither exists.
async fn link_delays(
    State(st): State<AppState>,
) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let live = st.live().as_ref().map(|run| run.delays.subscribe());
    let rx = live.or_else(|| st.probe().as_ref().map(ProbeSession::subscribe));
    let stream = futures::stream::unfold(rx, |rx| async move {
        let mut rx = rx?;
        loop {
            match rx.recv().await {
                Ok(batch) => {
                    let ev = Event::default()
                        .event("delays")
                        .json_data(&batch)
                        .expect("delay batches serialize");
                    return Some((Ok(ev), Some(rx)));
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("delay stream subscriber skipped {n} batches");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkStateRequest {
    up: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AppliedChange {
    /// `experiment` or `probe`.
    pub target: String,
    pub id: String,
    /// Emulated time of the change; `None` when the run had already ended.
    pub at_s: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LinkStateResponse {
    pub link: String,
    pub up: bool,
    pub applied: Vec<AppliedChange>,
}

fn resolve(topo: &Topology, a: &str, b: &str) -> Option<(usize, usize)> {
    let i = topo.find(a).ok()?.index;
    let j = topo.find(b).ok()?.index;
    topo.link(i, j)?;
    Some((i, j))
}

/// Change a link in whatever is running now: the experiment (at its next
/// slice boundary) and the idle probe session (immediately).
async fn post_link_state(
    State(st): State<AppState>,
    Path((a, b)): Path<(String, String)>,
    body: Bytes,
) -> Result<Json<LinkStateResponse>, ApiError> {
    let req: LinkStateRequest = serde_json::from_str(body_text(&body)?).map_err(malformed)?;
    let mut link = None;
    let mut applied = Vec::new();

    let injected = st.live().as_ref().and_then(|run| {
        let (i, j) = resolve(&run.topology, &a, &b)?;
        let at = run.control.inject(i, j, req.up);
        Some((run.experiment_id.clone(), run.topology.link_label(i, j), at))
    });
    if let Some((id, label, at)) = injected {
        if let Some(at) = at {
            st.with_experiment(&id, |e| {
                e.handle.injections.push(LinkInjection {
                    link: label.clone(),
                    up: req.up,
                    at_s: at.as_secs_f64(),
                })
            });
        }
        applied.push(AppliedChange {
            target: "experiment".into(),
            id,
            at_s: at.map(SimTime::as_secs_f64),
        });
        link = Some(label);
    }

    {
        let probe = st.probe();
        if let Some(session) = probe.as_ref() {
            if let Some((i, j)) = resolve(&session.topology, &a, &b) {
                let at = session
                    .set_link_state(i, j, req.up)
                    .expect("link was resolved in this topology");
                applied.push(AppliedChange {
                    target: "probe".into(),
                    id: session.topology_id.clone(),
                    at_s: Some(at.as_secs_f64()),
                });
                link = Some(session.topology.link_label(i, j));
            }
        }
    }

    let link = match link {
        Some(l) => l,
        // nothing active knows the link: still accept it if a stored topology does
        None => st
            .topologies()
            .iter()
            .find_map(|t| resolve(&t.topology, &a, &b).map(|(i, j)| t.topology.link_label(i, j)))
            .ok_or(ApiError::UnknownLink(a, b))?,
    };
    Ok(Json(LinkStateResponse {
        link,
        up: req.up,
        applied,
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeRequest {
    interval_ms: Option<u64>,
}

async fn start_probe(
    State(st): State<AppState>,
    Path(topology_id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: ProbeRequest = match body_text(&body) {
        Err(ApiError::EmptyBody) => ProbeRequest::default(),
        text => serde_json::from_str(text?).map_err(malformed)?,
    };
    let interval = match req.interval_ms {
        Some(0) => return Err(malformed("interval_ms must be positive")),
        Some(ms) => SimTime::from_millis(ms),
        None => SimTime::from_secs_f64(DEFAULT_PROBE_INTERVAL_S),
    };
    let t = st
        .topology(&topology_id)
        .ok_or_else(|| ApiError::UnknownTopology(topology_id.clone()))?;
    let session = ProbeSession::start(topology_id.clone(), t.topology.clone(), interval);
    // replacing a session ends its subscribers' streams
    *st.probe() = Some(session);
    Ok(Json(json!({
        "topology_id": topology_id,
        "interval_ms": interval.as_millis_f64(),
    })))
}

async fn stop_probe(State(st): State<AppState>) -> Json<Value> {
    let stopped = st.probe().take().is_some();
    Json(json!({ "stopped": stopped }))
}

async fn get_leases(State(st): State<AppState>) -> Json<Vec<LeaseRecord>> {
    let leases = st.leases().read().unwrap_or_else(|e| e.into_inner());
    Json(leases.leases().cloned().collect())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogParams {
    source: Option<IpAddr>,
    app: Option<String>,
    max_severity: Option<u8>,
    start: Option<i64>,
    end: Option<i64>,
    /// Keep only the newest `limit` matches.
    limit: Option<usize>,
}

async fn get_logs(
    State(st): State<AppState>,
    Query(p): Query<LogParams>,
) -> Result<Json<Vec<LogEntry>>, ApiError> {
    let mut q = LogQuery::default();
    if let Some(s) = p.source {
        q = q.source(s);
    }
    if let Some(app) = p.app {
        q = q.app(app);
    }
    if let Some(level) = p.max_severity {
        q = q.severity(Severity::new(level).ok_or_else(|| malformed("max_severity must be 0-7"))?);
    }
    if p.start.is_some() || p.end.is_some() {
        q = q.range(p.start.unwrap_or(i64::MIN), p.end.unwrap_or(i64::MAX));
    }
    let store = st.logs().read().unwrap_or_else(|e| e.into_inner());
    let found = store.query(&q).map_err(malformed)?;
    let skip = p.limit.map_or(0, |n| found.len().saturating_sub(n));
    Ok(Json(found.into_iter().skip(skip).cloned().collect()))
}
