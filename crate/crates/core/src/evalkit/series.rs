use std::fmt;

use serde::{Deserialize, Serialize};

use crate::emulator::{BenchReport, Phase, EMULATED_EPOCH_US};
use crate::logrepo::{Event, LogEntry, LogQuery, LogStore, Timestamp};
use crate::topo::{node_address, NodeId};
use crate::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ThroughputMbps,
    RttMs,
    LinkDelayMs,
    TableSizes,
    PhaseRuntimeS,
    /// Interests per second arriving at a producer.
    InterestRate,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::ThroughputMbps => "throughput_mbps",
            Metric::RttMs => "rtt_ms",
            Metric::LinkDelayMs => "link_delay_ms",
            Metric::TableSizes => "table_sizes",
            Metric::PhaseRuntimeS => "phase_runtime_s",
            Metric::InterestRate => "interest_rate",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `value` is `None` for a gap (e.g. a lost probe round), never for zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub bucket_start: f64,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub metric: Metric,
    pub subject: String,
    /// Seconds; zero for single-snapshot series.
    pub bucket_width: f64,
    pub points: Vec<Point>,
}

impl MetricSeries {
    pub fn new(metric: Metric, subject: impl Into<String>, bucket_width: f64) -> Self {
        MetricSeries {
            metric,
            subject: subject.into(),
            bucket_width,
            points: Vec::new(),
        }
    }

    /// Bucket starts strictly increase and sit on the bucket grid.
    pub fn is_well_formed(&self) -> bool {
        let increasing = self
            .points
            .windows(2)
            .all(|w| w[0].bucket_start < w[1].bucket_start);
        let on_grid = self.bucket_width == 0.0
            || self.points.iter().all(|p| {
                let k = p.bucket_start / self.bucket_width;
                (k - k.round()).abs() < 1e-9
            });
        increasing && on_grid
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().filter_map(|p| p.value)
    }
}

/// Time axis used to bucket log records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucketing {
    /// Receipt time that maps to t = 0.
    pub origin: Timestamp,
    pub duration: SimTime,
    pub width: SimTime,
}

impl Bucketing {
    /// Buckets over an emulated run. Panics if `width` is zero.
    pub fn emulated(duration: SimTime, width: SimTime) -> Self {
        assert!(width > SimTime::ZERO, "bucket width must be positive");
        Bucketing {
            origin: EMULATED_EPOCH_US,
            duration,
            width,
        }
    }

    pub fn with_width(self, width: SimTime) -> Self {
        Bucketing::emulated(self.duration, width).with_origin(self.origin)
    }

    pub fn with_origin(mut self, origin: Timestamp) -> Self {
        self.origin = origin;
        self
    }

    /// `ceil(duration / width)`.
    pub fn bucket_count(&self) -> usize {
        self.duration.as_micros().div_ceil(self.width.as_micros()) as usize
    }

    pub fn width_s(&self) -> f64 {
        self.width.as_secs_f64()
    }

    pub fn start_of(&self, bucket: usize) -> f64 {
        (bucket as u64 * self.width.as_micros()) as f64 / 1e6
    }

    /// Index of the bucket holding `at`, if inside the run.
    pub fn bucket_of(&self, at: Timestamp) -> Option<usize> {
        let rel = at.checked_sub(self.origin)?;
        if rel < 0 || rel as u64 >= self.duration.as_micros() {
            return None;
        }
        Some((rel as u64 / self.width.as_micros()) as usize)
    }
}

fn node_records<'a>(store: &'a LogStore, node: &NodeId, b: &Bucketing) -> Vec<&'a LogEntry> {
    let end = b.origin + b.duration.as_micros() as Timestamp;
    let q = LogQuery::default()
        .source(node_address(node.index).into())
        .range(b.origin, end);
    store.query(&q).expect("range is ordered")
}

/// Consumer goodput: data bytes logged by `node` per bucket, in Mb/s.
pub fn compute_throughput(store: &LogStore, node: &NodeId, b: &Bucketing) -> MetricSeries {
    let mut bytes = vec![0u64; b.bucket_count()];
    for e in node_records(store, node, b) {
        if let Some(Event::Data { bytes: n, .. }) = Event::parse(&e.record.msg) {
            if let Some(k) = b.bucket_of(e.received_at) {
                bytes[k] += n;
            }
        }
    }
    let width = b.width_s();
    let mut series = MetricSeries::new(Metric::ThroughputMbps, &node.label, width);
    series.points = bytes
        .iter()
        .enumerate()
        .map(|(k, &n)| Point {
            bucket_start: b.start_of(k),
            value: Some(n as f64 * 8.0 / width / 1e6),
        })
        .collect();
    series
}

/// Interests per second reaching the producer application on `node`.
pub fn compute_interest_rate(store: &LogStore, node: &NodeId, b: &Bucketing) -> MetricSeries {
    let mut counts = vec![0u64; b.bucket_count()];
    for e in node_records(store, node, b) {
        if e.record.app != "producer" {
            continue;
        }
        if let Some(Event::Interest { .. }) = Event::parse(&e.record.msg) {
            if let Some(k) = b.bucket_of(e.received_at) {
                counts[k] += 1;
            }
        }
    }
    let width = b.width_s();
    let mut series = MetricSeries::new(Metric::InterestRate, &node.label, width);
    series.points = counts
        .iter()
        .enumerate()
        .map(|(k, &n)| Point {
            bucket_start: b.start_of(k),
            value: Some(n as f64 / width),
        })
        .collect();
    series
}

/// Mean interest RTT per bucket; buckets without samples are omitted.
pub fn compute_rtt(store: &LogStore, node: &NodeId, b: &Bucketing) -> MetricSeries {
    let mut sums = vec![(0.0f64, 0u64); b.bucket_count()];
    for e in node_records(store, node, b) {
        if let Some(Event::Rtt { ms, .. }) = Event::parse(&e.record.msg) {
            if let Some(k) = b.bucket_of(e.received_at) {
                sums[k].0 += ms;
                sums[k].1 += 1;
            }
        }
    }
    let mut series = MetricSeries::new(Metric::RttMs, &node.label, b.width_s());
    series.points = sums
        .iter()
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(k, (sum, n))| Point {
            bucket_start: b.start_of(k),
            value: Some(sum / *n as f64),
        })
        .collect();
    series
}

/// Probe results for `link` (labels joined by `-`, lower index first), one
/// point per probe round. Use the probe interval as the bucket width. A round
/// with only loss records yields a gap.
pub fn compute_link_delay(store: &LogStore, link: &str, b: &Bucketing) -> MetricSeries {
    // (sum, samples, losses)
    let mut rounds = vec![(0.0f64, 0u64, 0u64); b.bucket_count()];
    let end = b.origin + b.duration.as_micros() as Timestamp;
    let q = LogQuery::default().range(b.origin, end).app("probe");
    for e in store.query(&q).expect("range is ordered") {
        let Some(Event::Probe { link: l, rtt_ms }) = Event::parse(&e.record.msg) else {
            continue;
        };
        if l != link {
            continue;
        }
        if let Some(k) = b.bucket_of(e.received_at) {
            match rtt_ms {
                Some(ms) => {
                    rounds[k].0 += ms;
                    rounds[k].1 += 1;
                }
                None => rounds[k].2 += 1,
            }
        }
    }
    let mut series = MetricSeries::new(Metric::LinkDelayMs, link, b.width_s());
    series.points = rounds
        .iter()
        .enumerate()
        .filter(|(_, (_, n, lost))| n + lost > 0)
        .map(|(k, (sum, n, _))| Point {
            bucket_start: b.start_of(k),
            value: (*n > 0).then(|| sum / *n as f64),
        })
        .collect();
    series
}

/// One single-point series per node: its remote FIB entry count.
pub fn table_size_series(report: &BenchReport) -> Vec<MetricSeries> {
    report
        .table_sizes
        .iter()
        .map(|t| MetricSeries {
            metric: Metric::TableSizes,
            subject: t.node.label.clone(),
            bucket_width: 0.0,
            points: vec![Point {
                bucket_start: 0.0,
                value: Some(t.remote_entries as f64),
            }],
        })
        .collect()
}

/// One single-point series per benchmark phase.
pub fn phase_runtime_series(report: &BenchReport) -> Vec<MetricSeries> {
    report
        .phases
        .iter()
        .map(|p| MetricSeries {
            metric: Metric::PhaseRuntimeS,
            subject: match p.phase {
                Phase::LinkConfig => "link_config",
                Phase::Routing => "routing",
                Phase::Install => "install",
            }
            .to_string(),
            bucket_width: 0.0,
            points: vec![Point {
                bucket_start: 0.0,
                value: Some(p.seconds),
            }],
        })
        .collect()
}
