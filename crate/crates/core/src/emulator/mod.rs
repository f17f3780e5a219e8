//! Deterministic discrete-event emulation of the testbed.
//!
//! Each node runs a [`ForwarderState`](crate::ndn::ForwarderState); links are
//! pure delays with no per-hop processing time. A consumer application issues
//! interests under AIMD control capped at a demand rate, a producer answers
//! them, and every link is probed periodically. Nodes log to an in-process
//! [`LogStore`](crate::logrepo::LogStore) stamped with emulator time.
//!
//! Repetition `r` of an experiment is seeded with `seed + r` and is
//! reproducible bit for bit.

mod aimd;
mod bench;
mod engine;
mod run;
mod spec;

pub use aimd::{
    consumer_on_data, consumer_on_timeout, demand_to_interest_rate, send_interval, AimdState,
    INITIAL_RTO, MAX_RTO, MIN_RTO,
};
pub use bench::{
    benchmark_prefix_install, ring_topology, BenchReport, Phase, PhaseTiming, TableSize,
};
pub use engine::{
    emulated_timestamp, Engine, EngineError, EngineOptions, EngineOutput, EventRecord, HopTrace,
    PacketKind, RunStats, EMULATED_EPOCH_US, PIT_SWEEP_INTERVAL,
};
pub use run::{
    build_engine, finish_repetition, repetition_seed, run_experiment, run_experiment_with,
    run_repetition, EmulatorError, Manifest, RepetitionArtifacts, RepetitionManifest,
    RunDirectory, START_JITTER,
};
pub use spec::{
    parse_experiment_spec, ExperimentDocument, ExperimentSpec, FailureDocument, ScheduledFailure,
    SpecError, DEFAULT_DEMAND_MBPS, DEFAULT_DURATION_S, DEFAULT_PAYLOAD_SIZE,
    DEFAULT_PROBE_INTERVAL_S,
};
