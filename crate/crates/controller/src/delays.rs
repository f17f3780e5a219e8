use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use testbed_core::emulator::EMULATED_EPOCH_US;
use testbed_core::logrepo::{Event, LogQuery, LogStore, Timestamp};
use testbed_core::topo::Topology;
use testbed_core::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDelay {
    pub link: String,
    /// Probe result in ms; `None` marks a loss.
    pub delay_ms: Option<f64>,
}

/// Everything one probe round measured, links in topology order. Links
/// whose reply had not arrived when the batch was cut are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayBatch {
    pub round: u64,
    pub at_s: f64,
    pub links: Vec<LinkDelay>,
}

/// Rounds that have completed once the emulator reaches `now`.
pub fn completed_rounds(now: SimTime, interval: SimTime) -> u64 {
    now.as_micros() / interval.as_micros().max(1)
}

pub fn delay_batch(store: &LogStore, topo: &Topology, interval: SimTime, round: u64) -> DelayBatch {
    let width = interval.as_micros().max(1);
    let start = round * width;
    let q = LogQuery::default().app("probe").range(
        EMULATED_EPOCH_US + start as Timestamp,
        EMULATED_EPOCH_US + (start + width) as Timestamp,
    );
    let mut seen: HashMap<&str, Option<f64>> = HashMap::new();
    let entries = store.query(&q).expect("range is ordered");
    for e in &entries {
        if let Some(Event::Probe { link, rtt_ms }) = Event::parse(&e.record.msg) {
            seen.insert(link, rtt_ms);
        }
    }
    let links = topo
        .links()
        .filter_map(|(a, b, _)| {
            let link = topo.link_label(a, b);
            let delay_ms = *seen.get(link.as_str())?;
            Some(LinkDelay { link, delay_ms })
        })
        .collect();
    DelayBatch {
        round,
        at_s: SimTime(start).as_secs_f64(),
        links,
    }
}
