use serde::{Deserialize, Serialize};

use super::series::{
    compute_interest_rate, compute_link_delay, compute_rtt, compute_throughput, Bucketing, Metric,
    MetricSeries,
};
use crate::emulator::{ExperimentSpec, RepetitionArtifacts};
use crate::SimTime;

/// Default width of time buckets.
pub const DEFAULT_BUCKET: SimTime = SimTime(1_000_000);

/// Seconds either side of a failure compared by the default windows.
pub const FAILURE_WINDOW_S: f64 = 2.0;

/// Mean and population standard deviation of one series over `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub metric: Metric,
    pub subject: String,
    pub window_start: f64,
    pub window_end: f64,
    pub samples: usize,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
}

fn aggregate(series: &MetricSeries, (start, end): (f64, f64)) -> Aggregate {
    let values: Vec<f64> = series
        .points
        .iter()
        .filter(|p| start <= p.bucket_start && p.bucket_start < end)
        .filter_map(|p| p.value)
        .collect();
    let n = values.len();
    let (mean, stddev) = if n == 0 {
        (None, None)
    } else {
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        (Some(mean), Some(var.sqrt()))
    };
    Aggregate {
        metric: series.metric,
        subject: series.subject.clone(),
        window_start: start,
        window_end: end,
        samples: n,
        mean,
        stddev,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub repetition: u32,
    pub windows: Vec<(f64, f64)>,
    pub series: Vec<MetricSeries>,
    pub aggregates: Vec<Aggregate>,
}

impl RunSummary {
    /// Aggregate every series over every window (buckets whose start lies in the window).
    pub fn new(repetition: u32, series: Vec<MetricSeries>, windows: Vec<(f64, f64)>) -> Self {
        let aggregates = series
            .iter()
            .flat_map(|s| windows.iter().map(move |w| aggregate(s, *w)))
            .collect();
        RunSummary {
            repetition,
            windows,
            series,
            aggregates,
        }
    }

    /// True when the stored aggregates match a recomputation from the series.
    pub fn verify(&self) -> bool {
        let fresh = RunSummary::new(self.repetition, self.series.clone(), self.windows.clone());
        fresh.aggregates == self.aggregates
    }

    pub fn series(&self, metric: Metric, subject: &str) -> Option<&MetricSeries> {
        self.series
            .iter()
            .find(|s| s.metric == metric && s.subject == subject)
    }

    pub fn aggregate(&self, metric: Metric, subject: &str, window: (f64, f64)) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| {
            a.metric == metric
                && a.subject == subject
                && a.window_start == window.0
                && a.window_end == window.1
        })
    }
}

/// The whole run, plus two seconds before and after the first failure.
pub fn default_windows(spec: &ExperimentSpec) -> Vec<(f64, f64)> {
    let end = spec.duration.as_secs_f64();
    let mut windows = vec![(0.0, end)];
    // failures at or past the end of the run change nothing measurable
    let first = spec.failures.iter().map(|f| f.at).filter(|&at| at < spec.duration).min();
    if let Some(first) = first {
        let f = first.as_secs_f64();
        windows.push(((f - FAILURE_WINDOW_S).max(0.0), f));
        windows.push((f, (f + FAILURE_WINDOW_S).min(end)));
    }
    windows
}

/// Consumer goodput and RTT, producer interest rate and every link's probe series.
pub fn summarize_repetition(
    spec: &ExperimentSpec,
    rep: &RepetitionArtifacts,
    bucket: SimTime,
) -> RunSummary {
    let b = Bucketing::emulated(spec.duration, bucket);
    let mut series = vec![
        compute_throughput(&rep.store, &spec.consumer, &b),
        compute_rtt(&rep.store, &spec.consumer, &b),
        compute_interest_rate(&rep.store, &spec.producer, &b),
    ];
    let probes = b.with_width(spec.probe_interval);
    for (a, c, _) in spec.topology.links() {
        let label = spec.topology.link_label(a, c);
        series.push(compute_link_delay(&rep.store, &label, &probes));
    }
    RunSummary::new(rep.repetition, series, default_windows(spec))
}
