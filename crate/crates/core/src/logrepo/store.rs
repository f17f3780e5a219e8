use std::collections::HashMap;
use std::net::IpAddr;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{parse_syslog, Severity, SyslogError, SyslogRecord};

/// Microseconds since the Unix epoch, as stamped by the controller on receipt.
pub type Timestamp = i64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Arrival sequence number, shared with quarantined lines.
    pub seq: u64,
    pub received_at: Timestamp,
    pub source: IpAddr,
    pub record: SyslogRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedLine {
    pub seq: u64,
    pub received_at: Timestamp,
    pub source: IpAddr,
    pub raw: Vec<u8>,
    pub error: String,
}

/// Passes records at least as important as `max_severity` (numerically lower or equal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityFilter {
    pub max_severity: Severity,
}

impl SeverityFilter {
    pub fn new(max_severity: Severity) -> Self {
        SeverityFilter { max_severity }
    }

    pub fn passes(&self, severity: Severity) -> bool {
        severity <= self.max_severity
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("inverted time range: {0} > {1}")]
    InvertedRange(Timestamp, Timestamp),
}

/// Conjunction of optional predicates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogQuery {
    pub source: Option<IpAddr>,
    pub severity: Option<SeverityFilter>,
    /// Half-open `[start, end)` on `received_at`.
    pub range: Option<(Timestamp, Timestamp)>,
    pub app: Option<String>,
}

impl LogQuery {
    pub fn source(mut self, source: IpAddr) -> Self {
        self.source = Some(source);
        self
    }

    pub fn severity(mut self, max: Severity) -> Self {
        self.severity = Some(SeverityFilter::new(max));
        self
    }

    pub fn range(mut self, start: Timestamp, end: Timestamp) -> Self {
        self.range = Some((start, end));
        self
    }

    pub fn app(mut self, app: impl Into<String>) -> Self {
        self.app = Some(app.into());
        self
    }

    fn matches(&self, e: &LogEntry) -> bool {
        self.source.map_or(true, |s| e.source == s)
            && self.severity.map_or(true, |f| f.passes(e.record.severity))
            && self
                .range
                .map_or(true, |(a, b)| a <= e.received_at && e.received_at < b)
            && self.app.as_deref().map_or(true, |a| e.record.app == a)
    }
}

/// Append-only central log store. Records never change once appended.
#[derive(Debug, Default, Clone)]
pub struct LogStore {
    records: Vec<LogEntry>,
    quarantine: Vec<QuarantinedLine>,
    by_source: HashMap<IpAddr, Vec<usize>>,
    // true while received_at has never decreased, which allows range bisection
    time_ordered: bool,
    next_seq: u64,
}

impl LogStore {
    pub fn new() -> Self {
        LogStore {
            time_ordered: true,
            ..Default::default()
        }
    }

    fn take_seq(&mut self) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        seq
    }

    /// Append an already parsed record.
    pub fn ingest(
        &mut self,
        record: SyslogRecord,
        source: IpAddr,
        received_at: Timestamp,
    ) -> &LogEntry {
        let seq = self.take_seq();
        if let Some(last) = self.records.last() {
            if received_at < last.received_at {
                self.time_ordered = false;
            }
        }
        self.by_source
            .entry(source)
            .or_default()
            .push(self.records.len());
        self.records.push(LogEntry {
            seq,
            received_at,
            source,
            record,
        });
        self.records.last().expect("just pushed")
    }

    /// Parse and append one datagram; unparseable lines go to quarantine.
    pub fn ingest_datagram(
        &mut self,
        raw: &[u8],
        source: IpAddr,
        received_at: Timestamp,
    ) -> Result<&LogEntry, SyslogError> {
        match parse_syslog(raw) {
            Ok(record) => Ok(self.ingest(record, source, received_at)),
            Err(err) => {
                let seq = self.take_seq();
                self.quarantine.push(QuarantinedLine {
                    seq,
                    received_at,
                    source,
                    raw: raw.to_vec(),
                    error: err.to_string(),
                });
                Err(err)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[LogEntry] {
        &self.records
    }

    pub fn quarantine(&self) -> &[QuarantinedLine] {
        &self.quarantine
    }

    /// Parsed plus quarantined.
    pub fn total_received(&self) -> u64 {
        self.next_seq
    }

    /// Records matching every given predicate, in arrival order.
    pub fn query(&self, q: &LogQuery) -> Result<Vec<&LogEntry>, QueryError> {
        if let Some((a, b)) = q.range {
            if a > b {
                return Err(QueryError::InvertedRange(a, b));
            }
        }
        let out = match q.source {
            Some(src) => self
                .by_source
                .get(&src)
                .map(|idx| {
                    idx.iter()
                        .map(|&i| &self.records[i])
                        .filter(|e| q.matches(e))
                        .collect()
                })
                .unwrap_or_default(),
            None => {
                let slice = match (q.range, self.time_ordered) {
                    (Some((a, b)), true) => {
                        let lo = self.records.partition_point(|e| e.received_at < a);
                        let hi = self.records.partition_point(|e| e.received_at < b);
                        &self.records[lo..hi.max(lo)]
                    }
                    _ => &self.records[..],
                };
                slice.iter().filter(|e| q.matches(e)).collect()
            }
        };
        Ok(out)
    }
}

/// Store shared between a listener thread and readers.
pub type SharedLogStore = Arc<RwLock<LogStore>>;

pub fn shared_store() -> SharedLogStore {
    Arc::new(RwLock::new(LogStore::new()))
}
