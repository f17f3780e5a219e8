//! Core of the NDN/IP testbed controller.
//!
//! * [`topo`]: adjacency-matrix topologies and static global route compilation.
//! * [`ndn`]: the per-node NDN data plane (FIB, PIT, CS, strategies).
//! * [`emulator`]: deterministic discrete-event emulation of a whole testbed.
//! * [`discovery`]: DHCP parsing, lease registry and provisioning plans.
//! * [`logrepo`]: syslog parsing, ingestion and queries.
//! * [`evalkit`]: metrics computed from the log store and CSV export.

pub mod discovery;
pub mod emulator;
pub mod evalkit;
pub mod logrepo;
pub mod ndn;
pub mod time;
pub mod topo;

pub use time::SimTime;
