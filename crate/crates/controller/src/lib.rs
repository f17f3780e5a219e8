//! The controller's service surface: topology submission, experiment
//! lifecycle, metrics and a live link-delay feed, over HTTP and JSON.
//!
//! Experiments run one at a time on a dedicated worker thread. Handlers only
//! translate between HTTP and `testbed-core`.

mod api;
mod delays;
mod error;
mod live;
mod probe;
mod state;
mod worker;

pub use api::{router, AppliedChange, LinkStateResponse, TopologyCreated, TopologyView};
pub use delays::{delay_batch, DelayBatch, LinkDelay};
pub use error::ApiError;
pub use live::{effective_spec, run_live_repetition, Injection, LiveControl, Reference, SLICE};
pub use probe::ProbeSession;
pub use state::{
    AppState, ControllerConfig, ExperimentHandle, ExperimentState, LinkInjection, StoredTopology,
};
