use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dataset::{DatasetError, Session};

/// Sampling-period statistics of one sensor stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingStats {
    pub sensor: String,
    pub mean_period_s: f64,
    pub period_std_s: f64,
    pub sample_count: usize,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatsIssue {
    /// Fewer than two samples; the period is undefined.
    InsufficientSamples { sensor: String, count: usize },
    /// Input was not sorted by timestamp and has been sorted.
    Resorted { sensor: String },
}

impl std::fmt::Display for StatsIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StatsIssue::InsufficientSamples { sensor, count } => {
                write!(f, "{sensor}: {count} samples, period undefined")
            }
            StatsIssue::Resorted { sensor } => write!(f, "{sensor}: timestamps out of order, sorted"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatsReport {
    pub rows: Vec<TimingStats>,
    pub issues: Vec<StatsIssue>,
}

/// Statistics over a timestamp series in nanoseconds.
///
/// Sorts unsorted input. The mean period is `duration / (n - 1)`; the
/// standard deviation is the sample (n - 1) deviation of successive
/// differences.
pub fn timing_stats(sensor: &str, timestamps_ns: &[i64]) -> Result<TimingStats, StatsIssue> {
    let n = timestamps_ns.len();
    if n < 2 {
        return Err(StatsIssue::InsufficientSamples {
            sensor: sensor.to_string(),
            count: n,
        });
    }
    let sorted;
    let ts = if timestamps_ns.windows(2).all(|w| w[0] <= w[1]) {
        timestamps_ns
    } else {
        let mut v = timestamps_ns.to_vec();
        v.sort_unstable();
        sorted = v;
        &sorted
    };
    // Work in nanoseconds and divide once so uniform grids come out exact.
    let span_ns = (ts[n - 1] - ts[0]) as f64;
    let mean_ns = span_ns / (n - 1) as f64;
    let std_ns = if n > 2 {
        let ss: f64 = ts
            .windows(2)
            .map(|w| {
                let d = (w[1] - w[0]) as f64 - mean_ns;
                d * d
            })
            .sum();
        (ss / (n - 2) as f64).sqrt()
    } else {
        0.0
    };
    let duration_s = span_ns / 1e9;
    let mean_period_s = mean_ns / 1e9;
    let period_std_s = std_ns / 1e9;
    Ok(TimingStats {
        sensor: sensor.to_string(),
        mean_period_s,
        period_std_s,
        sample_count: n,
        duration_s,
    })
}

/// One row per stream and source id; streams with several ids also get a
/// `:pooled` row over all of their timestamps.
pub fn compute_stats(session: &Session) -> Result<StatsReport, DatasetError> {
    let mut report = StatsReport::default();
    for stream in session.layout.streams.keys() {
        let records = session.records(stream)?;
        let mut by_id: BTreeMap<Option<u32>, Vec<i64>> = BTreeMap::new();
        let mut all = Vec::with_capacity(records.len());
        for r in &records {
            by_id.entry(r.source_id()).or_default().push(r.timestamp_ns());
            all.push(r.timestamp_ns());
        }
        if by_id.is_empty() {
            by_id.insert(None, Vec::new());
        }
        let multi = by_id.len() > 1;
        let mut series: Vec<(String, Vec<i64>)> = by_id
            .into_iter()
            .map(|(id, ts)| {
                let name = match (multi, id) {
                    (true, Some(id)) => format!("{stream}:{id}"),
                    (true, None) => format!("{stream}:-"),
                    (false, _) => stream.to_string(),
                };
                (name, ts)
            })
            .collect();
        if multi {
            series.push((format!("{stream}:pooled"), all));
        }
        for (name, ts) in series {
            if ts.windows(2).any(|w| w[0] > w[1]) {
                tracing::warn!(sensor = %name, "timestamps out of order, sorting");
                report.issues.push(StatsIssue::Resorted { sensor: name.clone() });
            }
            match timing_stats(&name, &ts) {
                Ok(row) => report.rows.push(row),
                Err(issue) => report.issues.push(issue),
            }
        }
    }
    Ok(report)
}

impl StatsReport {
    /// CSV with columns mirroring the acquisition-statistics table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# sensor,mean_period_s,period_std_s,num_samples,duration_s\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{},{:.3}",
                r.sensor, r.mean_period_s, r.period_std_s, r.sample_count, r.duration_s
            );
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<20} {:>12} {:>12} {:>10} {:>12}\n",
            "Sensor", "Mean Period", "Period STD", "Samples", "Duration"
        );
        let _ = writeln!(
            out,
            "{:<20} {:>12} {:>12} {:>10} {:>12}",
            "", "(s)", "(s)", "", "(s)"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<20} {:>12.4} {:>12.4} {:>10} {:>12.2}",
                r.sensor, r.mean_period_s, r.period_std_s, r.sample_count, r.duration_s
            );
        }
        for issue in &self.issues {
            match issue {
                StatsIssue::InsufficientSamples { sensor, count } => {
                    let _ = writeln!(out, "{sensor}: only {count} sample(s), period undefined");
                }
                StatsIssue::Resorted { sensor } => {
                    let _ = writeln!(out, "{sensor}: timestamps were out of order and sorted");
                }
            }
        }
        out
    }
}
