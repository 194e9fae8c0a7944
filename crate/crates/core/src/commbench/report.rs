use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::BenchResult;

const LATENCY_ROW: &str = "latency_ms";
const THROUGHPUT_ROW: &str = "throughput_kibps";

struct Row {
    quantity: &'static str,
    buffer: usize,
    cells: Vec<Option<String>>,
}

fn rows(results: &[BenchResult]) -> Vec<Row> {
    let mut out = Vec::new();
    let probe_sizes: BTreeSet<usize> = results
        .iter()
        .filter_map(|r| r.latency.as_ref().map(|l| l.frame_bytes))
        .collect();
    for buffer in probe_sizes {
        out.push(Row {
            quantity: LATENCY_ROW,
            buffer,
            cells: results
                .iter()
                .map(|r| {
                    r.latency
                        .as_ref()
                        .filter(|l| l.frame_bytes == buffer)
                        .map(|l| format!("{:.3}", l.mean_ms))
                })
                .collect(),
        });
    }
    let sizes: BTreeSet<usize> = results
        .iter()
        .flat_map(|r| r.throughput.iter().map(|t| t.size))
        .collect();
    for buffer in sizes {
        out.push(Row {
            quantity: THROUGHPUT_ROW,
            buffer,
            cells: results
                .iter()
                .map(|r| {
                    r.throughput
                        .iter()
                        .find(|t| t.size == buffer)
                        .map(|t| format!("{:.3}", t.kib_per_s()))
                })
                .collect(),
        });
    }
    out
}

/// One row per (quantity, buffer size), one column per channel.
/// Latency rows use the probe frame size as their buffer size.
pub fn report_csv(results: &[BenchResult]) -> String {
    let mut s = String::from("quantity,buffer_size");
    for r in results {
        s.push(',');
        s.push_str(&r.label.replace(',', ";"));
    }
    s.push('\n');
    for row in rows(results) {
        let _ = write!(s, "{},{}", row.quantity, row.buffer);
        for c in &row.cells {
            s.push(',');
            s.push_str(c.as_deref().unwrap_or(""));
        }
        s.push('\n');
    }
    s
}

pub fn report_table(results: &[BenchResult]) -> String {
    let mut header = vec!["Quantity".to_string(), "Buffer (B)".to_string()];
    header.extend(results.iter().map(|r| r.label.clone()));
    let mut lines = vec![header];
    for row in rows(results) {
        let name = match row.quantity {
            LATENCY_ROW => "Latency (ms)",
            _ => "Throughput (KiBps)",
        };
        let mut line = vec![name.to_string(), row.buffer.to_string()];
        line.extend(row.cells.into_iter().map(|c| c.unwrap_or_else(|| "-".into())));
        lines.push(line);
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|i| lines.iter().map(|l| l[i].len()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for (n, line) in lines.iter().enumerate() {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        s.push_str(cells.join("  ").trim_end());
        s.push('\n');
        if n == 0 {
            s.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            s.push('\n');
        }
    }
    for r in results {
        if let Some(l) = &r.latency {
            let _ = writeln!(
                s,
                "{}: latency std {:.3} ms, {} probes lost",
                r.label, l.std_ms, l.lost
            );
        }
        let timeouts: usize = r.throughput.iter().map(|t| t.timeouts).sum();
        if timeouts > 0 {
            let _ = writeln!(s, "{}: {} ack timeouts", r.label, timeouts);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;
    use crate::commbench::{LatencyStats, ThroughputResult};

    fn result(label: &str, sizes: &[usize]) -> BenchResult {
        BenchResult {
            label: label.into(),
            latency: Some(LatencyStats {
                mean_ms: 10.0,
                std_ms: 0.0,
                received: 1000,
                lost: 0,
                frame_bytes: 18,
            }),
            throughput: sizes
                .iter()
                .map(|&size| ThroughputResult {
                    size,
                    chunked: false,
                    bytes_ok: size as u64 * 1000,
                    elapsed: Duration::from_secs(10),
                    timeouts: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn two_channels_give_one_latency_and_four_throughput_rows() {
        let csv = report_csv(&[
            result("a", &[64, 256, 512, 1024]),
            result("b", &[64, 256, 512, 1024]),
        ]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "quantity,buffer_size,a,b");
        assert_eq!(lines[1], "latency_ms,18,10.000,10.000");
        assert_eq!(lines[2], "throughput_kibps,64,6.250,6.250");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn empty_sizes_give_latency_only() {
        let csv = report_csv(&[result("x", &[])]);
        assert_eq!(csv, "quantity,buffer_size,x\nlatency_ms,18,10.000\n");
        assert!(report_table(&[result("x", &[])]).contains("Latency (ms)"));
    }
}
