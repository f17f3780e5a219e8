use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::net::IpAddr;

use chrono::DateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::aimd::{send_interval, AimdState};
use crate::logrepo::{LogStore, Severity, SyslogRecord, Timestamp, TESTBED_FACILITY};
use crate::ndn::{
    Action, DataPacket, FaceId, ForwarderConfig, ForwarderState, Interest, Name, Strategy,
    DEFAULT_HOP_LIMIT,
};
use crate::topo::{compile_node_configs, node_address, NodeId, TopoError, Topology};
use crate::SimTime;

/// Wall-clock instant that emulator time zero maps to in log records
/// (2024-01-01T00:00:00Z).
pub const EMULATED_EPOCH_US: Timestamp = 1_704_067_200_000_000;

pub const PIT_SWEEP_INTERVAL: SimTime = SimTime(100_000);

/// Log receipt time of an emulator instant.
pub fn emulated_timestamp(t: SimTime) -> Timestamp {
    EMULATED_EPOCH_US + t.as_micros() as Timestamp
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    pub strategy: Strategy,
    pub forwarder: ForwarderConfig,
    /// Probe cadence; `None` disables link probing.
    pub probe_interval: Option<SimTime>,
    /// Node-side syslog threshold: less important records are never emitted.
    pub log_threshold: Severity,
    pub seed: u64,
    /// Keep a per-hop packet trace (tests only; large).
    pub trace_packets: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            strategy: Strategy::BestRoute,
            forwarder: ForwarderConfig::default(),
            probe_interval: Some(SimTime::from_millis(5_000)),
            log_threshold: Severity::INFO,
            seed: 0,
            trace_packets: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketKind {
    Interest,
    Data,
}

/// One link traversal. `arrived` is `None` when the packet was lost on the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopTrace {
    pub kind: PacketKind,
    pub from: usize,
    pub to: usize,
    pub sent: SimTime,
    pub arrived: Option<SimTime>,
}

/// Control-plane happenings worth keeping in the run's event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub at_us: u64,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub events: u64,
    pub interests_sent: u64,
    pub retransmissions: u64,
    pub data_received: u64,
    pub timeouts: u64,
    pub packets_lost_on_links: u64,
    pub min_window: f64,
    pub max_window: f64,
    /// Sends that left more than `ceil(window)` interests outstanding.
    pub window_overcommits: u64,
    pub records_filtered: u64,
}

#[derive(Debug, Clone)]
enum Packet {
    Interest(Interest),
    Data(DataPacket),
}

#[derive(Debug, Clone)]
enum EventKind {
    Deliver {
        node: usize,
        face: FaceId,
        link: usize,
        generation: u64,
        packet: Packet,
        trace: Option<usize>,
    },
    ConsumerSend,
    ConsumerTimeout {
        seq: u64,
        attempt: u32,
    },
    Express {
        node: usize,
        name: Name,
    },
    ProbeRound,
    ProbeReply {
        a: usize,
        b: usize,
        generation: u64,
        sent: SimTime,
    },
    LinkState {
        a: usize,
        b: usize,
        up: bool,
    },
    PitSweep,
}

struct Scheduled {
    at: SimTime,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    // reversed: BinaryHeap pops the earliest (at, seq) first
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

#[derive(Debug, Clone, Copy)]
struct FaceLink {
    neighbor: usize,
    remote_face: FaceId,
    delay: SimTime,
}

#[derive(Debug)]
struct Outstanding {
    sent_at: SimTime,
    attempt: u32,
    in_flight: bool,
}

#[derive(Debug)]
struct Consumer {
    node: usize,
    prefix: Name,
    aimd: AimdState,
    interval: SimTime,
    next_send_at: SimTime,
    send_pending: bool,
    outstanding: HashMap<u64, Outstanding>,
    retransmit: VecDeque<u64>,
}

impl Consumer {
    fn segment_name(&self, seq: u64) -> Name {
        self.prefix
            .child("seg")
            .and_then(|n| n.child(seq.to_string()))
            .expect("segment components are valid")
    }

    fn segment_of(&self, name: &Name) -> Option<u64> {
        let comps = name.components();
        let n = self.prefix.len();
        if comps.len() == n + 2 && self.prefix.is_prefix_of(name) && comps[n] == "seg" {
            comps[n + 1].parse().ok()
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
struct Producer {
    prefix: Name,
    payload: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Topology(#[from] TopoError),
    #[error("no node with index {0}")]
    UnknownNode(usize),
}

/// One emulated network run. Single-threaded and deterministic for a given seed.
pub struct Engine {
    topo: Topology,
    options: EngineOptions,
    nodes: Vec<ForwarderState>,
    addresses: Vec<IpAddr>,
    face_links: Vec<Vec<Option<FaceLink>>>,
    generations: Vec<u64>,
    queue: BinaryHeap<Scheduled>,
    next_seq: u64,
    now: SimTime,
    rng: ChaCha8Rng,
    consumer: Option<Consumer>,
    producers: Vec<Option<Producer>>,
    scripted: HashMap<(usize, Name), SimTime>,
    store: LogStore,
    events: Vec<EventRecord>,
    stats: RunStats,
    trace: Vec<HopTrace>,
}

impl Engine {
    /// Compile routes for `topo` and install them on one forwarder per node.
    pub fn new(topo: Topology, options: EngineOptions) -> Self {
        let n = topo.node_count();
        let configs = compile_node_configs(&topo);
        let nodes: Vec<ForwarderState> = configs
            .iter()
            .map(|c| ForwarderState::from_config(c, options.strategy, options.forwarder))
            .collect();
        let mut face_links = vec![Vec::new(); n];
        for cfg in &configs {
            let here = cfg.node.index;
            for face in &cfg.faces {
                let there = face.neighbor.index;
                let slot = face.face_id as usize;
                if face_links[here].len() <= slot {
                    face_links[here].resize(slot + 1, None);
                }
                let remote_face = nodes[there]
                    .face_towards(here)
                    .expect("links are symmetric");
                let delay = topo.link(here, there).expect("face has a link").delay_ms;
                face_links[here][slot] = Some(FaceLink {
                    neighbor: there,
                    remote_face,
                    delay: SimTime::from_millis_f64(delay),
                });
            }
        }
        let mut engine = Engine {
            addresses: (0..n).map(|i| IpAddr::V4(node_address(i))).collect(),
            generations: vec![0; n * n],
            producers: vec![None; n],
            face_links,
            nodes,
            queue: BinaryHeap::new(),
            next_seq: 0,
            now: SimTime::ZERO,
            rng: ChaCha8Rng::seed_from_u64(options.seed),
            consumer: None,
            scripted: HashMap::new(),
            store: LogStore::new(),
            events: Vec::new(),
            stats: RunStats {
                min_window: f64::INFINITY,
                ..RunStats::default()
            },
            trace: Vec::new(),
            options,
            topo,
        };
        engine.schedule(SimTime::ZERO, EventKind::PitSweep);
        if options.probe_interval.is_some() {
            engine.schedule(SimTime::ZERO, EventKind::ProbeRound);
        }
        engine
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn forwarder(&self, node: usize) -> &ForwarderState {
        &self.nodes[node]
    }

    pub fn forwarder_mut(&mut self, node: usize) -> &mut ForwarderState {
        &mut self.nodes[node]
    }

    pub fn store(&self) -> &LogStore {
        &self.store
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn trace(&self) -> &[HopTrace] {
        &self.trace
    }

    pub fn consumer_window(&self) -> Option<f64> {
        self.consumer.as_ref().map(|c| c.aimd.window)
    }

    fn check_node(&self, node: usize) -> Result<(), EngineError> {
        if node < self.nodes.len() {
            Ok(())
        } else {
            Err(EngineError::UnknownNode(node))
        }
    }

    /// Serve `prefix` from an application on `node`.
    pub fn add_producer(
        &mut self,
        node: usize,
        prefix: &Name,
        payload: u32,
    ) -> Result<(), EngineError> {
        self.check_node(node)?;
        self.nodes[node].register_prefix(prefix);
        self.producers[node] = Some(Producer {
            prefix: prefix.clone(),
            payload,
        });
        Ok(())
    }

    /// Make `prefix` routable everywhere along the same next hops as `via`.
    pub fn mirror_routes(&mut self, via: &Name, prefix: &Name) {
        for fw in &mut self.nodes {
            if let Some(entry) = fw.fib.get(via).cloned() {
                for hop in entry.next_hops {
                    fw.fib.add_next_hop(prefix, hop.face, hop.cost);
                }
            }
        }
    }

    /// Start an AIMD consumer fetching `prefix/seg/<n>` from `start`, capped at `demand_mbps`.
    pub fn add_consumer(
        &mut self,
        node: usize,
        prefix: &Name,
        demand_mbps: f64,
        payload: u32,
        start: SimTime,
    ) -> Result<(), EngineError> {
        self.check_node(node)?;
        self.consumer = Some(Consumer {
            node,
            prefix: prefix.clone(),
            aimd: AimdState::new(),
            interval: send_interval(demand_mbps, payload),
            next_send_at: start,
            send_pending: true,
            outstanding: HashMap::new(),
            retransmit: VecDeque::new(),
        });
        self.schedule(start, EventKind::ConsumerSend);
        Ok(())
    }

    /// Issue a single interest for `name` from `node`'s application face at `at`.
    pub fn express_interest(&mut self, node: usize, name: Name, at: SimTime) -> Result<(), EngineError> {
        self.check_node(node)?;
        self.schedule(at, EventKind::Express { node, name });
        Ok(())
    }

    pub fn schedule_link_state(
        &mut self,
        a: usize,
        b: usize,
        up: bool,
        at: SimTime,
    ) -> Result<(), EngineError> {
        self.require_link(a, b)?;
        self.schedule(at, EventKind::LinkState { a, b, up });
        Ok(())
    }

    /// Change a link's state at the current emulator time.
    pub fn set_link_state(&mut self, a: usize, b: usize, up: bool) -> Result<(), EngineError> {
        self.require_link(a, b)?;
        self.apply_link_state(a, b, up);
        Ok(())
    }

    fn require_link(&self, a: usize, b: usize) -> Result<(), EngineError> {
        self.check_node(a)?;
        self.check_node(b)?;
        if self.topo.link(a, b).is_none() {
            let label = |i: usize| self.topo.nodes()[i].label.clone();
            return Err(EngineError::Topology(TopoError::NoSuchLink(label(a), label(b))));
        }
        Ok(())
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Scheduled { at, seq, kind });
    }

    /// Execute every event strictly before `until`, then move the clock there.
    pub fn run_until(&mut self, until: SimTime) {
        while self.queue.peek().is_some_and(|e| e.at < until) {
            let ev = self.queue.pop().expect("peeked");
            debug_assert!(ev.at >= self.now);
            self.now = ev.at;
            self.stats.events += 1;
            self.handle(ev.kind);
        }
        self.now = self.now.max(until);
    }

    /// Stop at `duration` and hand over the run's outputs.
    pub fn finish(mut self, duration: SimTime) -> EngineOutput {
        self.run_until(duration);
        self.record_event("experiment_end", String::new());
        if self.stats.min_window == f64::INFINITY {
            self.stats.min_window = 0.0;
        }
        EngineOutput {
            nodes: self.topo.nodes().to_vec(),
            store: self.store,
            events: self.events,
            stats: self.stats,
            trace: self.trace,
        }
    }

    fn link_index(&self, a: usize, b: usize) -> usize {
        a.min(b) * self.nodes.len() + a.max(b)
    }

    fn label(&self, node: usize) -> &str {
        &self.topo.nodes()[node].label
    }

    fn record_event(&mut self, kind: &str, detail: String) {
        self.events.push(EventRecord {
            at_us: self.now.as_micros(),
            kind: kind.to_string(),
            detail,
        });
    }

    fn emits(&mut self, severity: Severity) -> bool {
        let ok = severity <= self.options.log_threshold;
        if !ok {
            self.stats.records_filtered += 1;
        }
        ok
    }

    fn log(&mut self, node: usize, severity: Severity, app: &str, msg: String) {
        let at = emulated_timestamp(self.now);
        let mut record = SyslogRecord::new(TESTBED_FACILITY, severity, self.label(node), app, &msg);
        record.timestamp = DateTime::from_timestamp_micros(at).map(|t| t.fixed_offset());
        let source = self.addresses[node];
        self.store.ingest(record, source, at);
    }

    fn handle(&mut self, kind: EventKind) {
        match kind {
            EventKind::Deliver {
                node,
                face,
                link,
                generation,
                packet,
                trace,
            } => {
                if self.generations[link] != generation {
                    self.stats.packets_lost_on_links += 1;
                    if self.emits(Severity::DEBUG) {
                        self.log(node, Severity::DEBUG, "nfd", format!("lost {} in flight", packet_name(&packet)));
                    }
                    return;
                }
                if let Some(i) = trace {
                    self.trace[i].arrived = Some(self.now);
                }
                self.process(node, face, packet);
            }
            EventKind::ConsumerSend => {
                if let Some(c) = self.consumer.as_mut() {
                    c.send_pending = false;
                }
                self.consumer_try_send();
            }
            EventKind::ConsumerTimeout { seq, attempt } => self.consumer_timeout(seq, attempt),
            EventKind::Express { node, name } => {
                let nonce = self.rng.gen();
                self.log(node, Severity::INFO, "consumer", format!("interest {name} {nonce}"));
                self.scripted.insert((node, name.clone()), self.now);
                let interest = Interest {
                    name,
                    nonce,
                    hop_limit: DEFAULT_HOP_LIMIT,
                    issued_at: self.now,
                };
                self.process(node, FaceId::APP, Packet::Interest(interest));
            }
            EventKind::ProbeRound => self.probe_round(),
            EventKind::ProbeReply {
                a,
                b,
                generation,
                sent,
            } => {
                let link = format!("{}-{}", self.label(a), self.label(b));
                let idx = self.link_index(a, b);
                if self.generations[idx] == generation {
                    let rtt = (self.now - sent).as_millis_f64();
                    self.log(a, Severity::NOTICE, "probe", format!("probe {link} {rtt:.3}"));
                } else {
                    self.log(a, Severity::WARNING, "probe", format!("probe {link} loss"));
                }
            }
            EventKind::LinkState { a, b, up } => self.apply_link_state(a, b, up),
            EventKind::PitSweep => {
                for node in 0..self.nodes.len() {
                    let expired = self.nodes[node].pit_sweep(self.now);
                    if !expired.is_empty() && self.emits(Severity::DEBUG) {
                        let msg = format!("pit expired {}", expired.len());
                        self.log(node, Severity::DEBUG, "nfd", msg);
                    }
                }
                self.schedule(self.now + PIT_SWEEP_INTERVAL, EventKind::PitSweep);
            }
        }
    }

    fn apply_link_state(&mut self, a: usize, b: usize, up: bool) {
        let (a, b) = (a.min(b), a.max(b));
        let current = self.topo.link(a, b).map(|l| l.up);
        if current == Some(up) {
            return;
        }
        self.topo
            .set_link_state(a, b, up)
            .expect("link existence checked when scheduled");
        let idx = self.link_index(a, b);
        self.generations[idx] += 1;
        let link = format!("{}-{}", self.label(a), self.label(b));
        let (sev, state) = if up {
            (Severity::NOTICE, "up")
        } else {
            (Severity::WARNING, "down")
        };
        self.log(a, sev, "emulator", format!("link {link} {state}"));
        self.record_event(if up { "restore" } else { "failure" }, link);
    }

    fn probe_round(&mut self) {
        let Some(interval) = self.options.probe_interval else {
            return;
        };
        self.record_event("probe_timer", String::new());
        let links: Vec<(usize, usize, bool, f64)> = self
            .topo
            .links()
            .map(|(a, b, l)| (a, b, l.up, l.delay_ms))
            .collect();
        for (a, b, up, delay_ms) in links {
            if up {
                let generation = self.generations[self.link_index(a, b)];
                let rtt = SimTime::from_millis_f64(delay_ms);
                self.schedule(
                    self.now + rtt + rtt,
                    EventKind::ProbeReply {
                        a,
                        b,
                        generation,
                        sent: self.now,
                    },
                );
            } else {
                let link = format!("{}-{}", self.label(a), self.label(b));
                self.log(a, Severity::WARNING, "probe", format!("probe {link} loss"));
            }
        }
        self.schedule(self.now + interval, EventKind::ProbeRound);
    }

    fn transmit(&mut self, node: usize, face: FaceId, packet: Packet) {
        let Some(link) = self.face_links[node].get(face.0 as usize).copied().flatten() else {
            return;
        };
        let idx = self.link_index(node, link.neighbor);
        let up = self.topo.link(node, link.neighbor).is_some_and(|l| l.up);
        let kind = match packet {
            Packet::Interest(_) => PacketKind::Interest,
            Packet::Data(_) => PacketKind::Data,
        };
        if !up {
            self.stats.packets_lost_on_links += 1;
            if self.options.trace_packets {
                self.trace.push(HopTrace {
                    kind,
                    from: node,
                    to: link.neighbor,
                    sent: self.now,
                    arrived: None,
                });
            }
            if self.emits(Severity::DEBUG) {
                let msg = format!("drop {} link down", packet_name(&packet));
                self.log(node, Severity::DEBUG, "nfd", msg);
            }
            return;
        }
        let trace = self.options.trace_packets.then(|| {
            self.trace.push(HopTrace {
                kind,
                from: node,
                to: link.neighbor,
                sent: self.now,
                arrived: None,
            });
            self.trace.len() - 1
        });
        self.schedule(
            self.now + link.delay,
            EventKind::Deliver {
                node: link.neighbor,
                face: link.remote_face,
                link: idx,
                generation: self.generations[idx],
                packet,
                trace,
            },
        );
    }

    /// Run packets through forwarders until everything left is on a link.
    fn process(&mut self, node: usize, face: FaceId, packet: Packet) {
        let mut work = VecDeque::from([(node, face, packet)]);
        while let Some((node, face, packet)) = work.pop_front() {
            let outcome = match &packet {
                Packet::Interest(i) => self.nodes[node].on_interest(i.clone(), face, self.now),
                Packet::Data(d) => self.nodes[node].on_data(d.clone(), face, self.now),
            };
            if let Some(reason) = outcome.dropped {
                if self.emits(Severity::DEBUG) {
                    let msg = format!("drop {} {reason}", packet_name(&packet));
                    self.log(node, Severity::DEBUG, "nfd", msg);
                }
            }
            for action in outcome.actions {
                match action {
                    Action::Interest { face, interest } if face == FaceId::APP => {
                        if let Some(data) = self.produce(node, &interest) {
                            work.push_back((node, FaceId::APP, Packet::Data(data)));
                        }
                    }
                    Action::Data { face, data } if face == FaceId::APP => {
                        self.deliver_to_app(node, data);
                    }
                    Action::Interest { face, interest } => {
                        self.transmit(node, face, Packet::Interest(interest))
                    }
                    Action::Data { face, data } => self.transmit(node, face, Packet::Data(data)),
                }
            }
        }
    }

    fn produce(&mut self, node: usize, interest: &Interest) -> Option<DataPacket> {
        let producer = self.producers[node].clone()?;
        if !producer.prefix.is_prefix_of(&interest.name) {
            return None;
        }
        let msg = format!("interest {} {}", interest.name, interest.nonce);
        self.log(node, Severity::INFO, "producer", msg);
        Some(DataPacket {
            name: interest.name.clone(),
            payload_size: producer.payload,
            produced_at: self.now,
        })
    }

    fn deliver_to_app(&mut self, node: usize, data: DataPacket) {
        if let Some(sent) = self.scripted.remove(&(node, data.name.clone())) {
            let rtt = (self.now - sent).as_millis_f64();
            self.log_receipt(node, &data, rtt);
            return;
        }
        let Some(consumer) = self.consumer.as_mut().filter(|c| c.node == node) else {
            return;
        };
        let Some(seq) = consumer.segment_of(&data.name) else {
            return;
        };
        let Some(out) = consumer.outstanding.remove(&seq) else {
            return;
        };
        let rtt = (self.now - out.sent_at).as_millis_f64();
        if out.in_flight {
            let sample = (out.attempt == 0).then_some(rtt);
            consumer.aimd.on_data(sample);
            let w = consumer.aimd.window;
            self.stats.max_window = self.stats.max_window.max(w);
        }
        self.stats.data_received += 1;
        self.log_receipt(node, &data, rtt);
        self.kick_consumer();
    }

    fn log_receipt(&mut self, node: usize, data: &DataPacket, rtt_ms: f64) {
        self.log(node, Severity::INFO, "consumer", format!("data {} {}", data.name, data.payload_size));
        self.log(node, Severity::INFO, "consumer", format!("rtt {} {rtt_ms:.3}", data.name));
    }

    fn kick_consumer(&mut self) {
        let now = self.now;
        let Some(c) = self.consumer.as_mut() else {
            return;
        };
        if c.send_pending || !c.aimd.can_send() {
            return;
        }
        c.send_pending = true;
        let at = c.next_send_at.max(now);
        self.schedule(at, EventKind::ConsumerSend);
    }

    fn consumer_timeout(&mut self, seq: u64, attempt: u32) {
        let Some(c) = self.consumer.as_mut() else {
            return;
        };
        let Some(out) = c.outstanding.get_mut(&seq) else {
            return;
        };
        if out.attempt != attempt || !out.in_flight {
            return;
        }
        out.in_flight = false;
        c.aimd.on_timeout();
        c.retransmit.push_back(seq);
        let (node, name, w) = (c.node, c.segment_name(seq), c.aimd.window);
        self.stats.timeouts += 1;
        self.stats.min_window = self.stats.min_window.min(w);
        self.log(node, Severity::NOTICE, "consumer", format!("timeout {name}"));
        self.kick_consumer();
    }

    fn consumer_try_send(&mut self) {
        let now = self.now;
        let Some(c) = self.consumer.as_mut() else {
            return;
        };
        if !c.aimd.can_send() {
            return;
        }
        if now < c.next_send_at {
            c.send_pending = true;
            let at = c.next_send_at;
            self.schedule(at, EventKind::ConsumerSend);
            return;
        }
        let mut seq = None;
        while let Some(s) = c.retransmit.pop_front() {
            if c.outstanding.get(&s).is_some_and(|o| !o.in_flight) {
                seq = Some(s);
                break;
            }
        }
        let seq = seq.unwrap_or_else(|| {
            let s = c.aimd.next_seq;
            c.aimd.next_seq += 1;
            s
        });
        let attempt = match c.outstanding.get_mut(&seq) {
            Some(out) => {
                out.attempt += 1;
                out.sent_at = now;
                out.in_flight = true;
                out.attempt
            }
            None => {
                c.outstanding.insert(
                    seq,
                    Outstanding {
                        sent_at: now,
                        attempt: 0,
                        in_flight: true,
                    },
                );
                0
            }
        };
        c.aimd.on_send();
        c.next_send_at = now + c.interval;
        let name = c.segment_name(seq);
        let node = c.node;
        let rto = c.aimd.rto;
        let window = c.aimd.window;
        if c.aimd.in_flight as f64 > window.ceil() {
            self.stats.window_overcommits += 1;
        }
        let more = c.aimd.can_send();
        if more {
            c.send_pending = true;
        }
        let next = c.next_send_at;

        self.stats.interests_sent += 1;
        if attempt > 0 {
            self.stats.retransmissions += 1;
        }
        self.stats.min_window = self.stats.min_window.min(window);
        self.stats.max_window = self.stats.max_window.max(window);
        if more {
            self.schedule(next, EventKind::ConsumerSend);
        }
        self.schedule(now + rto, EventKind::ConsumerTimeout { seq, attempt });

        let nonce: u32 = self.rng.gen();
        self.log(node, Severity::INFO, "consumer", format!("interest {name} {nonce}"));
        let interest = Interest {
            name,
            nonce,
            hop_limit: DEFAULT_HOP_LIMIT,
            issued_at: now,
        };
        self.process(node, FaceId::APP, Packet::Interest(interest));
    }
}

fn packet_name(p: &Packet) -> &Name {
    match p {
        Packet::Interest(i) => &i.name,
        Packet::Data(d) => &d.name,
    }
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct EngineOutput {
    pub nodes: Vec<NodeId>,
    pub store: LogStore,
    pub events: Vec<EventRecord>,
    pub stats: RunStats,
    pub trace: Vec<HopTrace>,
}
