//! Central log repository.
//!
//! Nodes send structured syslog lines over UDP (default port 514). Each line is
//! parsed, stamped with the controller's receipt time and appended to a
//! [`LogStore`]; lines that fail to parse are kept raw in a quarantine list.
//! Emulated runs ingest in-process with emulator-clock timestamps.
//!
//! Forwarder and application events use a small space-separated message grammar,
//! see [`Event`].

mod listener;
mod record;
mod store;

pub use listener::{now_micros, SyslogListener, DEFAULT_SYSLOG_PORT};
pub use record::{parse_syslog, Severity, SyslogError, SyslogRecord};
pub use store::{
    shared_store, LogEntry, LogQuery, LogStore, QuarantinedLine, QueryError, SeverityFilter,
    SharedLogStore, Timestamp,
};

use std::fmt;

/// Facility used by testbed nodes (local4).
pub const TESTBED_FACILITY: u8 = 20;

/// Message bodies understood by the evaluation layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Event<'a> {
    Interest { name: &'a str, nonce: u32 },
    Data { name: &'a str, bytes: u64 },
    Rtt { name: &'a str, ms: f64 },
    Probe { link: &'a str, rtt_ms: Option<f64> },
}

impl<'a> Event<'a> {
    /// Parse a message body; `None` for anything outside the grammar.
    pub fn parse(msg: &'a str) -> Option<Event<'a>> {
        let mut parts = msg.split(' ');
        let kind = parts.next()?;
        let subject = parts.next()?;
        let value = parts.next()?;
        if parts.next().is_some() {
            return None;
        }
        match kind {
            "interest" => Some(Event::Interest {
                name: subject,
                nonce: value.parse().ok()?,
            }),
            "data" => Some(Event::Data {
                name: subject,
                bytes: value.parse().ok()?,
            }),
            "rtt" => Some(Event::Rtt {
                name: subject,
                ms: value.parse().ok().filter(|v: &f64| v.is_finite())?,
            }),
            "probe" => Some(Event::Probe {
                link: subject,
                rtt_ms: match value {
                    "loss" => None,
                    v => Some(v.parse().ok().filter(|v: &f64| v.is_finite())?),
                },
            }),
            _ => None,
        }
    }
}

impl fmt::Display for Event<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Interest { name, nonce } => write!(f, "interest {name} {nonce}"),
            Event::Data { name, bytes } => write!(f, "data {name} {bytes}"),
            Event::Rtt { name, ms } => write!(f, "rtt {name} {ms:.3}"),
            Event::Probe {
                link,
                rtt_ms: Some(ms),
            } => write!(f, "probe {link} {ms:.3}"),
            Event::Probe { link, rtt_ms: None } => write!(f, "probe {link} loss"),
        }
    }
}
