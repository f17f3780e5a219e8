//! Per-node NDN data plane.
//!
//! [`ForwarderState`] owns one node's FIB, PIT and Content Store. Packets are
//! fed in with [`ForwarderState::on_interest`] / [`ForwarderState::on_data`] and
//! the resulting transmissions come back as [`Action`]s; the caller (the
//! emulator) moves them across links.

mod forwarder;
mod name;
mod strategy;
mod tables;

pub use forwarder::{Action, DropReason, FaceCounters, ForwarderConfig, ForwarderState, NodeCounters, Outcome};
pub use name::{Name, NameError};
pub use strategy::{strategy_select, Strategy, UnknownStrategy};
pub use tables::{fib_lpm, ContentStore, CsEntry, Fib, FibEntry, NextHop, Pit, PitEntry};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::topo::FaceKind;
use crate::SimTime;

pub const DEFAULT_HOP_LIMIT: u8 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaceId(pub u32);

impl FaceId {
    /// Local application face present on every node.
    pub const APP: FaceId = FaceId(0);
}

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "face{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    pub id: FaceId,
    /// Index of the node on the other side; `None` for the application face.
    pub remote: Option<usize>,
    pub kind: FaceKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interest {
    pub name: Name,
    pub nonce: u32,
    pub hop_limit: u8,
    pub issued_at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPacket {
    pub name: Name,
    pub payload_size: u32,
    pub produced_at: SimTime,
}
