use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::engine::{Engine, EngineError, EngineOptions, EventRecord, RunStats};
use super::ExperimentSpec;
use crate::logrepo::{LogQuery, LogStore, Severity};
use crate::ndn::ForwarderConfig;
use crate::topo::{node_address, node_name_prefix, shortest_distances, NodeId};
use crate::SimTime;

/// Upper bound of the consumer's random start offset.
pub const START_JITTER: SimTime = SimTime(1_000);

#[derive(Debug, Error)]
pub enum EmulatorError {
    #[error("{producer} is unreachable from {consumer} at t=0")]
    Unreachable { consumer: String, producer: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Outputs of one repetition.
#[derive(Debug, Clone)]
pub struct RepetitionArtifacts {
    pub repetition: u32,
    pub seed: u64,
    pub nodes: Vec<NodeId>,
    /// Every emitted syslog record, stamped with emulator time.
    pub store: LogStore,
    pub events: Vec<EventRecord>,
    pub stats: RunStats,
}

impl RepetitionArtifacts {
    /// The node's syslog stream in emission order, one canonical line per record.
    pub fn node_log_lines(&self, node: &NodeId) -> Vec<String> {
        let q = LogQuery::default().source(node_address(node.index).into());
        self.store
            .query(&q)
            .expect("no range given")
            .into_iter()
            .map(|e| e.record.to_string())
            .collect()
    }
}

/// Seed of repetition `r`.
pub fn repetition_seed(spec: &ExperimentSpec, r: u32) -> u64 {
    spec.seed.wrapping_add(r as u64)
}

/// Set up, but do not run, repetition `r` of `spec`.
pub fn build_engine(spec: &ExperimentSpec, r: u32) -> Result<Engine, EmulatorError> {
    let dist = shortest_distances(&spec.topology, spec.consumer.index);
    if dist[spec.producer.index].is_none() {
        return Err(EmulatorError::Unreachable {
            consumer: spec.consumer.label.clone(),
            producer: spec.producer.label.clone(),
        });
    }
    let seed = repetition_seed(spec, r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = SimTime(rng.gen_range(0..START_JITTER.as_micros()));
    let options = EngineOptions {
        strategy: spec.strategy,
        forwarder: ForwarderConfig::default(),
        probe_interval: Some(spec.probe_interval),
        log_threshold: Severity::INFO,
        seed: rng.gen(),
        trace_packets: false,
    };
    let mut engine = Engine::new(spec.topology.clone(), options);
    let home: crate::ndn::Name = node_name_prefix(spec.producer.index)
        .parse()
        .expect("node prefixes are valid names");
    if !home.is_prefix_of(&spec.content_prefix) {
        engine.mirror_routes(&home, &spec.content_prefix);
    }
    engine.add_producer(spec.producer.index, &spec.content_prefix, spec.payload_size)?;
    for f in &spec.failures {
        engine.schedule_link_state(f.a, f.b, false, f.at)?;
    }
    if spec.duration > SimTime::ZERO {
        engine.add_consumer(
            spec.consumer.index,
            &spec.content_prefix,
            spec.demand_rate_mbps,
            spec.payload_size,
            start,
        )?;
    }
    Ok(engine)
}

pub fn run_repetition(spec: &ExperimentSpec, r: u32) -> Result<RepetitionArtifacts, EmulatorError> {
    let engine = build_engine(spec, r)?;
    Ok(finish_repetition(spec, r, engine))
}

/// Run `engine` (built for repetition `r`) to the end of the experiment.
pub fn finish_repetition(spec: &ExperimentSpec, r: u32, engine: Engine) -> RepetitionArtifacts {
    let out = engine.finish(spec.duration);
    RepetitionArtifacts {
        repetition: r,
        seed: repetition_seed(spec, r),
        nodes: out.nodes,
        store: out.store,
        events: out.events,
        stats: out.stats,
    }
}

/// Run every repetition, in parallel, and reduce each with `f` as soon as it
/// finishes. Results come back in repetition order.
pub fn run_experiment_with<T, F>(spec: &ExperimentSpec, f: F) -> Result<Vec<T>, EmulatorError>
where
    T: Send,
    F: Fn(RepetitionArtifacts) -> T + Sync,
{
    // fail fast on setup errors before spawning anything
    build_engine(spec, 0)?;
    (0..spec.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(spec, r).map(&f))
        .collect()
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RepetitionArtifacts>, EmulatorError> {
    run_experiment_with(spec, |a| a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionManifest {
    pub repetition: u32,
    pub seed: u64,
    pub directory: String,
    pub logs: Vec<String>,
    pub stats: RunStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: ExperimentSpec,
    pub repetitions: Vec<RepetitionManifest>,
}

/// On-disk layout of a run:
///
/// ```text
/// <root>/spec.json
/// <root>/manifest.json
/// <root>/rep-000/<label>.log     one syslog line per record
/// <root>/rep-000/events.jsonl
/// ```
#[derive(Debug)]
pub struct RunDirectory {
    root: PathBuf,
    manifest: Manifest,
}

impl RunDirectory {
    pub fn create(root: impl Into<PathBuf>, spec: &ExperimentSpec) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        fs::write(root.join("spec.json"), spec.to_json())?;
        Ok(RunDirectory {
            root,
            manifest: Manifest {
                spec: spec.clone(),
                repetitions: Vec::new(),
            },
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_repetition(&mut self, rep: &RepetitionArtifacts) -> io::Result<()> {
        let dir_name = format!("rep-{:03}", rep.repetition);
        let dir = self.root.join(&dir_name);
        fs::create_dir_all(&dir)?;
        let mut logs = Vec::with_capacity(rep.nodes.len());
        for node in &rep.nodes {
            let file = format!("{}.log", node.label);
            let mut w = BufWriter::new(fs::File::create(dir.join(&file))?);
            for line in rep.node_log_lines(node) {
                writeln!(w, "{line}")?;
            }
            w.flush()?;
            logs.push(file);
        }
        let mut w = BufWriter::new(fs::File::create(dir.join("events.jsonl"))?);
        for ev in &rep.events {
            serde_json::to_writer(&mut w, ev)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        self.manifest.repetitions.push(RepetitionManifest {
            repetition: rep.repetition,
            seed: rep.seed,
            directory: dir_name,
            logs,
            stats: rep.stats.clone(),
        });
        Ok(())
    }

    /// Replace the recorded spec, e.g. after failures were added mid-run.
    pub fn set_spec(&mut self, spec: &ExperimentSpec) -> io::Result<()> {
        fs::write(self.root.join("spec.json"), spec.to_json())?;
        self.manifest.spec = spec.clone();
        Ok(())
    }

    /// Write `manifest.json`, repetitions sorted by index. A repetition
    /// written more than once keeps its latest entry.
    pub fn finish(mut self) -> io::Result<Manifest> {
        let mut latest = BTreeMap::new();
        for rep in self.manifest.repetitions.drain(..) {
            latest.insert(rep.repetition, rep);
        }
        self.manifest.repetitions = latest.into_values().collect();
        let text = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::canonical_diamond;

    fn short_spec() -> ExperimentSpec {
        ExperimentSpec::new(canonical_diamond(), "C0", "P1")
            .unwrap()
            .with_duration_s(0.5)
            .unwrap()
    }

    #[test]
    fn zero_duration_gives_empty_streams() {
        let spec = short_spec().with_duration_s(0.0).unwrap();
        let rep = run_repetition(&spec, 0).unwrap();
        assert!(rep.store.is_empty());
        assert_eq!(rep.stats.interests_sent, 0);
    }

    #[test]
    fn unreachable_producer_is_a_setup_error() {
        let topo = crate::topo::parse_adjacency(
            r#"{"labels":["A","B","C"],"matrix":[[null,1,null],[1,null,null],[null,null,null]]}"#,
        )
        .unwrap();
        let spec = ExperimentSpec::new(topo, "A", "C").unwrap();
        assert!(matches!(
            run_repetition(&spec, 0),
            Err(EmulatorError::Unreachable { .. })
        ));
    }

    #[test]
    fn repetitions_use_consecutive_seeds() {
        let spec = short_spec().with_seed(41).with_repetitions(3).unwrap();
        let seeds = run_experiment_with(&spec, |r| (r.repetition, r.seed)).unwrap();
        assert_eq!(seeds, [(0, 41), (1, 42), (2, 43)]);
    }

    #[test]
    fn run_directory_layout() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = short_spec().with_repetitions(2).unwrap();
        let mut dir = RunDirectory::create(tmp.path().join("run"), &spec).unwrap();
        for rep in run_experiment(&spec).unwrap() {
            dir.write_repetition(&rep).unwrap();
        }
        let manifest = dir.finish().unwrap();
        assert_eq!(manifest.repetitions.len(), 2);
        let root = tmp.path().join("run");
        let c0 = fs::read_to_string(root.join("rep-001/C0.log")).unwrap();
        assert!(c0.lines().count() > 10);
        assert!(c0.starts_with("<166>1 2024-01-01T00:00:00"));
        let back: Manifest =
            serde_json::from_str(&fs::read_to_string(root.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(back, manifest);
    }
}
