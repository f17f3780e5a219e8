use std::sync::{Arc, Mutex};
use std::time::Duration;

use testbed_core::emulator::{Engine, EngineError, EngineOptions};
use testbed_core::topo::Topology;
use testbed_core::SimTime;
use tokio::sync::broadcast;
use tokio::task::JoinHandle;
use tokio::time::Instant;

use crate::delays::{delay_batch, DelayBatch};

/// Idle probing of a topology with no traffic, emulated in real time: round
/// `k` is published `k + 1` intervals after the session starts.
pub struct ProbeSession {
    pub topology_id: String,
    pub topology: Topology,
    pub interval: SimTime,
    engine: Arc<Mutex<Engine>>,
    started: Instant,
    delays: broadcast::Sender<DelayBatch>,
    task: JoinHandle<()>,
}

impl ProbeSession {
    /// Must be called from within a tokio runtime.
    pub fn start(topology_id: String, topology: Topology, interval: SimTime) -> Self {
        let interval = interval.max(SimTime::from_millis(1));
        let options = EngineOptions {
            probe_interval: Some(interval),
            ..EngineOptions::default()
        };
        let engine = Arc::new(Mutex::new(Engine::new(topology.clone(), options)));
        let (delays, _) = broadcast::channel(16);
        let started = Instant::now();
        let task = tokio::spawn(publish_rounds(
            engine.clone(),
            topology.clone(),
            interval,
            started,
            delays.clone(),
        ));
        ProbeSession {
            topology_id,
            topology,
            interval,
            engine,
            started,
            delays,
            task,
        }
    }

    pub fn subscribe(&self) -> broadcast::Receiver<DelayBatch> {
        self.delays.subscribe()
    }

    /// Change a link now. Returns the emulated time of the change.
    pub fn set_link_state(&self, a: usize, b: usize, up: bool) -> Result<SimTime, EngineError> {
        let mut e = self.engine.lock().unwrap_or_else(|e| e.into_inner());
        let now = SimTime(self.started.elapsed().as_micros() as u64).max(e.now());
        e.run_until(now);
        e.set_link_state(a, b, up)?;
        Ok(e.now())
    }
}

impl Drop for ProbeSession {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn publish_rounds(
    engine: Arc<Mutex<Engine>>,
    topology: Topology,
    interval: SimTime,
    started: Instant,
    delays: broadcast::Sender<DelayBatch>,
) {
    for round in 0u64.. {
        let end = round + 1;
        tokio::time::sleep_until(started + Duration::from_micros(interval.as_micros() * end)).await;
        let batch = {
            let mut e = engine.lock().unwrap_or_else(|e| e.into_inner());
            e.run_until(SimTime(interval.as_micros() * end));
            delay_batch(e.store(), &topology, interval, round)
        };
        // nobody listening is fine
        let _ = delays.send(batch);
    }
}
