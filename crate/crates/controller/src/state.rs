use std::collections::BTreeMap;
use std::fmt;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex, MutexGuard, RwLock, RwLockReadGuard, RwLockWriteGuard};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use testbed_core::discovery::{LeaseRegistry, SharedLeaseRegistry};
use testbed_core::emulator::{ExperimentDocument, ExperimentSpec};
use testbed_core::evalkit::{RunSummary, DEFAULT_BUCKET};
use testbed_core::logrepo::{shared_store, SharedLogStore, DEFAULT_SYSLOG_PORT};
use testbed_core::topo::{compile_node_configs, NodeConfig, Topology, ValidationReport};
use testbed_core::SimTime;
use tokio::sync::broadcast;

use crate::delays::DelayBatch;
use crate::live::LiveControl;
use crate::probe::ProbeSession;
use crate::worker;

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    /// Where run directories go; nothing is written when unset.
    pub data_dir: Option<PathBuf>,
    /// Syslog address handed to nodes in provisioning plans.
    pub log_sink: SocketAddr,
    pub bucket: SimTime,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            data_dir: None,
            log_sink: SocketAddr::from(([10, 0, 0, 1], DEFAULT_SYSLOG_PORT)),
            bucket: DEFAULT_BUCKET,
        }
    }
}

#[derive(Debug)]
pub struct StoredTopology {
    pub id: String,
    pub topology: Topology,
    pub report: ValidationReport,
    pub configs: Vec<NodeConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentState {
    Pending,
    Running,
    Done,
    Failed,
}

impl ExperimentState {
    pub fn can_become(self, next: ExperimentState) -> bool {
        use ExperimentState::*;
        matches!((self, next), (Pending, Running) | (Running, Done) | (Running, Failed))
    }
}

impl fmt::Display for ExperimentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentState::Pending => "pending",
            ExperimentState::Running => "running",
            ExperimentState::Done => "done",
            ExperimentState::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkInjection {
    pub link: String,
    pub up: bool,
    pub at_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentHandle {
    pub id: String,
    pub state: ExperimentState,
    pub topology_id: String,
    pub spec: ExperimentDocument,
    pub created_at: DateTime<Utc>,
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
    pub error: Option<String>,
    /// Link changes that reached this run through the API.
    pub injections: Vec<LinkInjection>,
}

#[derive(Debug)]
pub struct Experiment {
    pub handle: ExperimentHandle,
    pub spec: Arc<ExperimentSpec>,
    pub pace: Option<f64>,
    pub summaries: Option<Arc<Vec<RunSummary>>>,
}

impl Experiment {
    /// Move to `next`; illegal transitions are refused and leave the state alone.
    pub fn transition(&mut self, next: ExperimentState) -> bool {
        if !self.handle.state.can_become(next) {
            log::error!("{}: refusing {} -> {}", self.handle.id, self.handle.state, next);
            return false;
        }
        self.handle.state = next;
        match next {
            ExperimentState::Running => self.handle.started_at = Some(Utc::now()),
            ExperimentState::Done | ExperimentState::Failed => self.handle.finished_at = Some(Utc::now()),
            ExperimentState::Pending => {}
        }
        true
    }
}

/// The experiment the worker is executing right now.
pub struct LiveRun {
    pub experiment_id: String,
    pub topology: Topology,
    pub control: Arc<LiveControl>,
    pub delays: broadcast::Sender<DelayBatch>,
}

pub struct Shared {
    pub config: ControllerConfig,
    pub logs: SharedLogStore,
    pub leases: SharedLeaseRegistry,
    topologies: RwLock<BTreeMap<String, Arc<StoredTopology>>>,
    experiments: RwLock<BTreeMap<String, Experiment>>,
    next_topology: AtomicU64,
    next_experiment: AtomicU64,
    jobs: Mutex<mpsc::Sender<String>>,
    live: Mutex<Option<LiveRun>>,
    probe: Mutex<Option<ProbeSession>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn read<T>(m: &RwLock<T>) -> RwLockReadGuard<'_, T> {
    m.read().unwrap_or_else(|e| e.into_inner())
}

fn write<T>(m: &RwLock<T>) -> RwLockWriteGuard<'_, T> {
    m.write().unwrap_or_else(|e| e.into_inner())
}

/// Cheap to clone; every handler gets one.
#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Shared>);

impl AppState {
    /// Fresh state with its own log store and lease registry, plus the
    /// experiment worker thread.
    pub fn new(config: ControllerConfig) -> Self {
        let logs = shared_store();
        let leases = Arc::new(RwLock::new(LeaseRegistry::default_pool()));
        Self::with_registries(config, logs, leases)
    }

    pub fn with_registries(
        config: ControllerConfig,
        logs: SharedLogStore,
        leases: SharedLeaseRegistry,
    ) -> Self {
        let (tx, rx) = mpsc::channel();
        let shared = Arc::new(Shared {
            config,
            logs,
            leases,
            topologies: RwLock::default(),
            experiments: RwLock::default(),
            next_topology: AtomicU64::new(1),
            next_experiment: AtomicU64::new(1),
            jobs: Mutex::new(tx),
            live: Mutex::new(None),
            probe: Mutex::new(None),
        });
        worker::spawn(Arc::downgrade(&shared), rx);
        AppState(shared)
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.0.config
    }

    pub fn logs(&self) -> &SharedLogStore {
        &self.0.logs
    }

    pub fn leases(&self) -> &SharedLeaseRegistry {
        &self.0.leases
    }

    pub fn add_topology(&self, topology: Topology) -> Arc<StoredTopology> {
        let n = self.0.next_topology.fetch_add(1, Ordering::Relaxed);
        let id = format!("topo-{n:04}");
        let stored = Arc::new(StoredTopology {
            id: id.clone(),
            report: topology.validation_report(),
            configs: compile_node_configs(&topology),
            topology,
        });
        write(&self.0.topologies).insert(id, stored.clone());
        stored
    }

    pub fn topology(&self, id: &str) -> Option<Arc<StoredTopology>> {
        read(&self.0.topologies).get(id).cloned()
    }

    pub fn topologies(&self) -> Vec<Arc<StoredTopology>> {
        read(&self.0.topologies).values().cloned().collect()
    }

    /// Store a pending experiment and queue it for the worker.
    pub fn submit(
        &self,
        topology_id: String,
        spec: ExperimentSpec,
        pace: Option<f64>,
    ) -> Result<ExperimentHandle, mpsc::SendError<String>> {
        let n = self.0.next_experiment.fetch_add(1, Ordering::Relaxed);
        let id = format!("exp-{n:04}");
        let handle = ExperimentHandle {
            id: id.clone(),
            state: ExperimentState::Pending,
            topology_id,
            spec: spec.to_document(),
            created_at: Utc::now(),
            started_at: None,
            finished_at: None,
            error: None,
            injections: Vec::new(),
        };
        write(&self.0.experiments).insert(
            id.clone(),
            Experiment {
                handle: handle.clone(),
                spec: Arc::new(spec),
                pace,
                summaries: None,
            },
        );
        if let Err(e) = lock(&self.0.jobs).send(id.clone()) {
            write(&self.0.experiments).remove(&id);
            return Err(e);
        }
        Ok(handle)
    }

    pub fn experiment(&self, id: &str) -> Option<ExperimentHandle> {
        read(&self.0.experiments).get(id).map(|e| e.handle.clone())
    }

    pub fn experiments(&self) -> Vec<ExperimentHandle> {
        read(&self.0.experiments).values().map(|e| e.handle.clone()).collect()
    }

    /// The handle and, once done, the per-repetition summaries.
    pub fn summaries(&self, id: &str) -> Option<(ExperimentHandle, Option<Arc<Vec<RunSummary>>>)> {
        read(&self.0.experiments)
            .get(id)
            .map(|e| (e.handle.clone(), e.summaries.clone()))
    }

    pub(crate) fn with_experiment<R>(&self, id: &str, f: impl FnOnce(&mut Experiment) -> R) -> Option<R> {
        write(&self.0.experiments).get_mut(id).map(f)
    }

    pub(crate) fn live(&self) -> MutexGuard<'_, Option<LiveRun>> {
        lock(&self.0.live)
    }

    pub(crate) fn probe(&self) -> MutexGuard<'_, Option<ProbeSession>> {
        lock(&self.0.probe)
    }
}
