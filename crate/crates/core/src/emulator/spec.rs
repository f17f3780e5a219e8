use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ndn::{Name, NameError, Strategy, UnknownStrategy};
use crate::topo::{node_name_prefix, AdjacencyDocument, NodeId, TopoError, Topology};
use crate::SimTime;

pub const DEFAULT_DEMAND_MBPS: f64 = 20.0;
pub const DEFAULT_PAYLOAD_SIZE: u32 = 1250;
pub const DEFAULT_DURATION_S: f64 = 16.0;
pub const DEFAULT_PROBE_INTERVAL_S: f64 = 5.0;

/// Longest emulated run accepted (one day).
const MAX_DURATION_S: f64 = 86_400.0;
const MAX_REPETITIONS: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("malformed experiment document: {0}")]
    Malformed(String),
    #[error(transparent)]
    Topology(#[from] TopoError),
    #[error("invalid content prefix: {0}")]
    InvalidPrefix(#[from] NameError),
    #[error(transparent)]
    Strategy(#[from] UnknownStrategy),
    #[error("consumer and producer are the same node")]
    SameNode,
    #[error("repetitions must be between 1 and {MAX_REPETITIONS}")]
    Repetitions,
    #[error("demand rate must be positive and finite")]
    DemandRate,
    #[error("payload size must be positive")]
    PayloadSize,
    #[error("{0} must be a finite, non-negative number of seconds")]
    InvalidTime(&'static str),
}

impl SpecError {
    pub fn kind(&self) -> &'static str {
        match self {
            SpecError::Malformed(_) => "malformed",
            SpecError::Topology(e) => e.kind(),
            SpecError::InvalidPrefix(_) => "invalid_prefix",
            SpecError::Strategy(_) => "unknown_strategy",
            SpecError::SameNode => "same_node",
            SpecError::Repetitions => "repetitions",
            SpecError::DemandRate => "demand_rate",
            SpecError::PayloadSize => "payload_size",
            SpecError::InvalidTime(_) => "invalid_time",
        }
    }
}

/// A link failure as written in experiment documents: `{"link": ["R3", "R4"], "at_s": 8}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureDocument {
    pub link: [String; 2],
    pub at_s: f64,
}

fn default_strategy() -> String {
    Strategy::default().to_string()
}
fn default_demand() -> f64 {
    DEFAULT_DEMAND_MBPS
}
fn default_payload() -> u32 {
    DEFAULT_PAYLOAD_SIZE
}
fn default_duration() -> f64 {
    DEFAULT_DURATION_S
}
fn default_probe_interval() -> f64 {
    DEFAULT_PROBE_INTERVAL_S
}
fn default_repetitions() -> u32 {
    1
}

/// JSON form of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDocument {
    pub topology: AdjacencyDocument,
    pub consumer: String,
    pub producer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_prefix: Option<String>,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default = "default_demand")]
    pub demand_rate_mbps: f64,
    #[serde(default = "default_payload")]
    pub payload_size: u32,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub failures: Vec<FailureDocument>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_probe_interval")]
    pub probe_interval_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledFailure {
    /// Lower endpoint index.
    pub a: usize,
    pub b: usize,
    pub at: SimTime,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExperimentDocument", into = "ExperimentDocument")]
pub struct ExperimentSpec {
    pub topology: Topology,
    pub consumer: NodeId,
    pub producer: NodeId,
    pub content_prefix: Name,
    pub strategy: Strategy,
    pub demand_rate_mbps: f64,
    pub payload_size: u32,
    pub duration: SimTime,
    pub failures: Vec<ScheduledFailure>,
    pub repetitions: u32,
    pub seed: u64,
    pub probe_interval: SimTime,
}

fn seconds(value: f64, what: &'static str) -> Result<SimTime, SpecError> {
    if value.is_finite() && (0.0..=MAX_DURATION_S).contains(&value) {
        Ok(SimTime::from_secs_f64(value))
    } else {
        Err(SpecError::InvalidTime(what))
    }
}

impl ExperimentSpec {
    /// The canonical link-failure experiment on `topology`: 20 Mb/s of 1250 B
    /// segments for 16 s, one repetition, no failures.
    pub fn new(topology: Topology, consumer: &str, producer: &str) -> Result<Self, SpecError> {
        let doc = ExperimentDocument {
            topology: topology.to_document(),
            consumer: consumer.into(),
            producer: producer.into(),
            content_prefix: None,
            strategy: default_strategy(),
            demand_rate_mbps: DEFAULT_DEMAND_MBPS,
            payload_size: DEFAULT_PAYLOAD_SIZE,
            duration_s: DEFAULT_DURATION_S,
            failures: Vec::new(),
            repetitions: 1,
            seed: 0,
            probe_interval_s: DEFAULT_PROBE_INTERVAL_S,
        };
        ExperimentSpec::try_from(doc)
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_repetitions(mut self, repetitions: u32) -> Result<Self, SpecError> {
        if !(1..=MAX_REPETITIONS).contains(&repetitions) {
            return Err(SpecError::Repetitions);
        }
        self.repetitions = repetitions;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_duration_s(mut self, duration_s: f64) -> Result<Self, SpecError> {
        self.duration = seconds(duration_s, "duration_s")?;
        Ok(self)
    }

    pub fn with_failure(mut self, a: &str, b: &str, at_s: f64) -> Result<Self, SpecError> {
        let failure = resolve_failure(&self.topology, a, b, at_s)?;
        self.failures.push(failure);
        Ok(self)
    }

    pub fn to_document(&self) -> ExperimentDocument {
        ExperimentDocument::from(self.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("experiment specs always serialize")
    }
}

fn resolve_failure(
    topo: &Topology,
    a: &str,
    b: &str,
    at_s: f64,
) -> Result<ScheduledFailure, SpecError> {
    let ia = topo.find(a)?.index;
    let ib = topo.find(b)?.index;
    if topo.link(ia, ib).is_none() {
        return Err(TopoError::NoSuchLink(a.into(), b.into()).into());
    }
    Ok(ScheduledFailure {
        a: ia.min(ib),
        b: ia.max(ib),
        at: seconds(at_s, "failure at_s")?,
    })
}

impl TryFrom<ExperimentDocument> for ExperimentSpec {
    type Error = SpecError;

    fn try_from(doc: ExperimentDocument) -> Result<Self, SpecError> {
        let topology = Topology::from_document(&doc.topology)?;
        let consumer = topology.find(&doc.consumer)?.clone();
        let producer = topology.find(&doc.producer)?.clone();
        if consumer == producer {
            return Err(SpecError::SameNode);
        }
        let strategy: Strategy = doc.strategy.parse()?;
        let content_prefix: Name = match &doc.content_prefix {
            Some(p) => p.parse()?,
            None => node_name_prefix(producer.index).parse()?,
        };
        if !(1..=MAX_REPETITIONS).contains(&doc.repetitions) {
            return Err(SpecError::Repetitions);
        }
        if !(doc.demand_rate_mbps.is_finite() && doc.demand_rate_mbps > 0.0) {
            return Err(SpecError::DemandRate);
        }
        if doc.payload_size == 0 {
            return Err(SpecError::PayloadSize);
        }
        let duration = seconds(doc.duration_s, "duration_s")?;
        let probe_interval = seconds(doc.probe_interval_s, "probe_interval_s")?;
        if probe_interval == SimTime::ZERO {
            return Err(SpecError::InvalidTime("probe_interval_s"));
        }
        let failures = doc
            .failures
            .iter()
            .map(|f| resolve_failure(&topology, &f.link[0], &f.link[1], f.at_s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExperimentSpec {
            topology,
            consumer,
            producer,
            content_prefix,
            strategy,
            demand_rate_mbps: doc.demand_rate_mbps,
            payload_size: doc.payload_size,
            duration,
            failures,
            repetitions: doc.repetitions,
            seed: doc.seed,
            probe_interval,
        })
    }
}

impl From<ExperimentSpec> for ExperimentDocument {
    fn from(spec: ExperimentSpec) -> Self {
        let label = |i: usize| spec.topology.nodes()[i].label.clone();
        ExperimentDocument {
            topology: spec.topology.to_document(),
            consumer: spec.consumer.label.clone(),
            producer: spec.producer.label.clone(),
            content_prefix: Some(spec.content_prefix.to_string()),
            strategy: spec.strategy.to_string(),
            demand_rate_mbps: spec.demand_rate_mbps,
            payload_size: spec.payload_size,
            duration_s: spec.duration.as_secs_f64(),
            failures: spec
                .failures
                .iter()
                .map(|f| FailureDocument {
                    link: [label(f.a), label(f.b)],
                    at_s: f.at.as_secs_f64(),
                })
                .collect(),
            repetitions: spec.repetitions,
            seed: spec.seed,
            probe_interval_s: spec.probe_interval.as_secs_f64(),
        }
    }
}

/// Parse and validate an experiment document.
pub fn parse_experiment_spec(text: &str) -> Result<ExperimentSpec, SpecError> {
    let doc: ExperimentDocument =
        serde_json::from_str(text).map_err(|e| SpecError::Malformed(e.to_string()))?;
    ExperimentSpec::try_from(doc)
}
