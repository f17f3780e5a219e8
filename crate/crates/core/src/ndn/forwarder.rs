use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    strategy_select, ContentStore, DataPacket, Face, FaceId, Fib, Interest, Name, Pit, PitEntry,
    Strategy,
};
use crate::topo::{FaceKind, NodeConfig, NodeId};
use crate::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwarderConfig {
    pub pit_lifetime: SimTime,
    pub cs_capacity: usize,
}

impl Default for ForwarderConfig {
    fn default() -> Self {
        ForwarderConfig {
            pit_lifetime: SimTime::from_millis(4000),
            cs_capacity: ContentStore::DEFAULT_CAPACITY,
        }
    }
}

/// A transmission requested by the forwarder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Interest { face: FaceId, interest: Interest },
    Data { face: FaceId, data: DataPacket },
}

/// Why a packet went no further.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Unroutable,
    DuplicateNonce,
    HopLimit,
    NoEligibleFace,
    Unsolicited,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::Unroutable => "unroutable",
            DropReason::DuplicateNonce => "duplicate",
            DropReason::HopLimit => "hop_limit",
            DropReason::NoEligibleFace => "no_face",
            DropReason::Unsolicited => "unsolicited",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceCounters {
    pub interests_in: u64,
    pub interests_out: u64,
    pub data_in: u64,
    pub data_out: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCounters {
    pub unroutable: u64,
    pub duplicate_nonce: u64,
    pub hop_limit_exhausted: u64,
    pub no_eligible_face: u64,
    pub unsolicited_data: u64,
    pub aggregated: u64,
    pub pit_timeouts: u64,
    pub cs_hits: u64,
    /// Data copies sent because a PIT entry was satisfied.
    pub pit_deliveries: u64,
}

/// Result of processing one packet.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub actions: Vec<Action>,
    pub dropped: Option<DropReason>,
}

impl Outcome {
    fn drop(reason: DropReason) -> Self {
        Outcome {
            actions: Vec::new(),
            dropped: Some(reason),
        }
    }
}

/// One node's NDN forwarding state. Single owner; move it between threads, never share it.
#[derive(Debug, Clone)]
pub struct ForwarderState {
    pub node: NodeId,
    pub strategy: Strategy,
    pub config: ForwarderConfig,
    faces: BTreeMap<FaceId, Face>,
    pub fib: Fib,
    pub pit: Pit,
    pub cs: ContentStore,
    face_counters: BTreeMap<FaceId, FaceCounters>,
    counters: NodeCounters,
}

impl ForwarderState {
    /// A forwarder with only the application face.
    pub fn new(node: NodeId, strategy: Strategy, config: ForwarderConfig) -> Self {
        let mut state = ForwarderState {
            node,
            strategy,
            config,
            faces: BTreeMap::new(),
            fib: Fib::new(),
            pit: Pit::default(),
            cs: ContentStore::new(config.cs_capacity),
            face_counters: BTreeMap::new(),
            counters: NodeCounters::default(),
        };
        state.add_face(Face {
            id: FaceId::APP,
            remote: None,
            kind: FaceKind::App,
        });
        state
    }

    /// Faces and FIB (primary routes plus alternates) from a compiled node config.
    pub fn from_config(cfg: &NodeConfig, strategy: Strategy, config: ForwarderConfig) -> Self {
        let mut state = ForwarderState::new(cfg.node.clone(), strategy, config);
        for face in &cfg.faces {
            state.add_face(Face {
                id: FaceId(face.face_id),
                remote: Some(face.neighbor.index),
                kind: face.kind,
            });
        }
        for route in cfg.ndn_routes.iter().chain(&cfg.ndn_alternates) {
            let prefix: Name = route
                .destination
                .parse()
                .expect("compiled NDN routes are valid names");
            if let Some(face) = state.face_towards(route.next_hop.index) {
                state.fib.add_next_hop(&prefix, face, route.cost);
            }
        }
        state
    }

    pub fn add_face(&mut self, face: Face) {
        self.face_counters.entry(face.id).or_default();
        self.faces.insert(face.id, face);
    }

    pub fn faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.values()
    }

    pub fn face(&self, id: FaceId) -> Option<&Face> {
        self.faces.get(&id)
    }

    pub fn face_towards(&self, neighbor: usize) -> Option<FaceId> {
        self.faces
            .values()
            .find(|f| f.remote == Some(neighbor))
            .map(|f| f.id)
    }

    /// Serve `prefix` from the local application face.
    pub fn register_prefix(&mut self, prefix: &Name) {
        self.fib.add_next_hop(prefix, FaceId::APP, 0.0);
    }

    pub fn counters(&self) -> NodeCounters {
        self.counters
    }

    pub fn face_counters(&self, face: FaceId) -> FaceCounters {
        self.face_counters.get(&face).copied().unwrap_or_default()
    }

    pub fn total_face_counters(&self) -> FaceCounters {
        self.face_counters
            .values()
            .fold(FaceCounters::default(), |acc, c| FaceCounters {
                interests_in: acc.interests_in + c.interests_in,
                interests_out: acc.interests_out + c.interests_out,
                data_in: acc.data_in + c.data_in,
                data_out: acc.data_out + c.data_out,
            })
    }

    fn tally(&mut self, face: FaceId) -> &mut FaceCounters {
        self.face_counters.entry(face).or_default()
    }

    fn send_data(&mut self, face: FaceId, data: DataPacket, out: &mut Vec<Action>) {
        self.tally(face).data_out += 1;
        out.push(Action::Data { face, data });
    }

    /// Process an interest arriving on `in_face`.
    ///
    /// Order: Content Store, then PIT (aggregation / duplicate suppression),
    /// then FIB and strategy.
    pub fn on_interest(&mut self, interest: Interest, in_face: FaceId, now: SimTime) -> Outcome {
        self.tally(in_face).interests_in += 1;

        if let Some(data) = self.cs.lookup(&interest.name, now).cloned() {
            self.counters.cs_hits += 1;
            let mut actions = Vec::with_capacity(1);
            self.send_data(in_face, data, &mut actions);
            return Outcome {
                actions,
                dropped: None,
            };
        }

        if let Some(entry) = self.pit.get(&interest.name) {
            if entry.expiry <= now {
                self.pit.remove(&interest.name);
                self.counters.pit_timeouts += 1;
            }
        }
        if let Some(entry) = self.pit.get_mut(&interest.name) {
            if entry.nonces.contains(&interest.nonce) {
                self.counters.duplicate_nonce += 1;
                return Outcome::drop(DropReason::DuplicateNonce);
            }
            entry.nonces.insert(interest.nonce);
            entry.in_faces.insert(in_face);
            self.counters.aggregated += 1;
            return Outcome::default();
        }

        let Some(fib_entry) = self.fib.longest_prefix_match(&interest.name) else {
            self.counters.unroutable += 1;
            return Outcome::drop(DropReason::Unroutable);
        };
        let faces = strategy_select(self.strategy, fib_entry, in_face);
        if faces.is_empty() {
            self.counters.no_eligible_face += 1;
            return Outcome::drop(DropReason::NoEligibleFace);
        }

        let mut actions = Vec::with_capacity(faces.len());
        let mut out_faces = BTreeSet::new();
        for face in faces {
            let is_app = face == FaceId::APP;
            let hop_limit = if is_app {
                interest.hop_limit
            } else {
                interest.hop_limit.saturating_sub(1)
            };
            if hop_limit == 0 {
                continue;
            }
            self.tally(face).interests_out += 1;
            out_faces.insert(face);
            actions.push(Action::Interest {
                face,
                interest: Interest {
                    hop_limit,
                    ..interest.clone()
                },
            });
        }
        if actions.is_empty() {
            self.counters.hop_limit_exhausted += 1;
            return Outcome::drop(DropReason::HopLimit);
        }
        self.pit.insert(PitEntry {
            name: interest.name.clone(),
            in_faces: [in_face].into(),
            out_faces,
            nonces: [interest.nonce].into(),
            expiry: now + self.config.pit_lifetime,
        });
        Outcome {
            actions,
            dropped: None,
        }
    }

    /// Process a data packet arriving on `in_face`.
    pub fn on_data(&mut self, data: DataPacket, in_face: FaceId, now: SimTime) -> Outcome {
        self.tally(in_face).data_in += 1;
        let Some(entry) = self.pit.remove(&data.name) else {
            self.counters.unsolicited_data += 1;
            return Outcome::drop(DropReason::Unsolicited);
        };
        let mut actions = Vec::with_capacity(entry.in_faces.len());
        for face in entry.in_faces {
            self.counters.pit_deliveries += 1;
            self.send_data(face, data.clone(), &mut actions);
        }
        self.cs.insert(data, now);
        Outcome {
            actions,
            dropped: None,
        }
    }

    /// Drop every PIT entry with `expiry <= now`; returns the expired names.
    pub fn pit_sweep(&mut self, now: SimTime) -> Vec<Name> {
        let expired = self.pit.sweep(now);
        self.counters.pit_timeouts += expired.len() as u64;
        expired.into_iter().map(|e| e.name).collect()
    }
}
