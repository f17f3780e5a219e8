//! Metrics computed from log stores, and their CSV export.
//!
//! Throughput is consumer goodput (bytes of `data` records), RTT comes from
//! `rtt` records and link delay from `probe` records. Benchmark reports map
//! to single-point table-size and phase-runtime series.

mod series;
mod summary;

pub use series::{
    compute_interest_rate, compute_link_delay, compute_rtt, compute_throughput,
    phase_runtime_series, table_size_series, Bucketing, Metric, MetricSeries, Point,
};
pub use summary::{
    default_windows, summarize_repetition, Aggregate, RunSummary, DEFAULT_BUCKET,
    FAILURE_WINDOW_S,
};

pub const CSV_HEADER: [&str; 4] = ["metric", "subject", "bucket_start", "value"];

fn write_rows<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    series: &MetricSeries,
    subject: &str,
) -> csv::Result<()> {
    for p in &series.points {
        let value = p.value.map(|v| format!("{v:.6}")).unwrap_or_default();
        w.write_record([
            series.metric.as_str(),
            subject,
            &format!("{:.6}", p.bucket_start),
            &value,
        ])?;
    }
    Ok(())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer never fails");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

/// Rows grouped by series in input order; values with six decimals, gaps empty.
pub fn export_csv(series: &[MetricSeries]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for s in series {
        write_rows(&mut w, s, &s.subject).expect("in-memory write");
    }
    finish(w)
}

/// All repetitions in one document; subjects become `rep-<r>/<subject>`.
pub fn export_runs_csv(runs: &[RunSummary]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for run in runs {
        for s in &run.series {
            let subject = format!("rep-{:03}/{}", run.repetition, s.subject);
            write_rows(&mut w, s, &subject).expect("in-memory write");
        }
    }
    finish(w)
}
