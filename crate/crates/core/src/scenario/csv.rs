use std::fmt::Write;

use crate::metrics::MetricsSnapshot;

pub const CSV_HEADER: &str = "scheme,n_nodes,seed,p_success,rtt_mean_s,rtt_p95_s,energy_daily_j,\
stale_prob,offered_frames,unmatched_tokens,p_eventual,p_success_nodes,rtt_samples,rtt_with_leisure_mean_s,\
outdated_prob,dropped_by_gate,mgets,mget_replies,refresh_requests,refresh_timeouts,late_replies,\
delivered,broadcast_sent,retry_exhausted,channel_access_failures,in_flight,sim_duration_s";

#[derive(Clone, Copy, Debug)]
enum Cell {
    Int(u64),
    Real(f64),
    Maybe(Option<f64>),
}

impl Cell {
    fn value(self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(v as f64),
            Cell::Real(v) => Some(v),
            Cell::Maybe(v) => v,
        }
    }

    fn render(self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) | Cell::Maybe(Some(v)) => format!("{v:.6}"),
            Cell::Maybe(None) => "NA".into(),
        }
    }
}

fn cells(m: &MetricsSnapshot) -> Vec<Cell> {
    use Cell::*;
    vec![
        Real(m.p_success),
        Maybe(m.rtt_mean),
        Maybe(m.rtt_p95),
        Real(m.energy_daily_per_node),
        Real(m.stale_probability),
        Int(m.frames.offered),
        Int(m.coap.unmatched_tokens),
        Real(m.p_eventual),
        Real(m.p_success_nodes),
        Int(m.rtt_samples),
        Maybe(m.rtt_with_leisure_mean),
        Real(m.outdated_probability),
        Int(m.dropped_by_gate),
        Int(m.coap.mgets),
        Int(m.coap.mget_replies),
        Int(m.coap.refresh_requests),
        Int(m.coap.refresh_timeouts),
        Int(m.coap.late_replies),
        Int(m.frames.delivered),
        Int(m.frames.broadcast_sent),
        Int(m.frames.retry_exhausted),
        Int(m.frames.channel_access_failures),
        Int(m.in_flight),
        Real(m.sim_duration.as_secs_f64()),
    ]
}

fn row(m: &MetricsSnapshot) -> String {
    let mut s = format!("{},{},{}", m.scheme, m.n_nodes, m.seed);
    for c in cells(m) {
        s.push(',');
        s.push_str(&c.render());
    }
    s
}

/// Column-wise mean of runs sharing a scheme and node count. Missing values
/// are skipped; a column with none present stays `NA`.
pub fn mean_row(group: &[MetricsSnapshot]) -> Option<String> {
    let first = group.first()?;
    let cols: Vec<Vec<Cell>> = group.iter().map(cells).collect();
    let mut s = format!("{},{},mean", first.scheme, first.n_nodes);
    for j in 0..cols[0].len() {
        let vals: Vec<f64> = cols.iter().filter_map(|c| c[j].value()).collect();
        let m = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
        s.push(',');
        s.push_str(&Cell::Maybe(m).render());
    }
    Some(s)
}

/// Renders runs as CSV. `manifest` lines are emitted first as `#` comments.
/// Each run of consecutive rows with the same scheme and node count is
/// followed by its mean row.
pub fn write_csv(rows: &[MetricsSnapshot], manifest: &[String]) -> String {
    let mut out = String::new();
    for line in manifest {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for group in rows.chunk_by(|a, b| a.scheme == b.scheme && a.n_nodes == b.n_nodes) {
        for m in group {
            out.push_str(&row(m));
            out.push('\n');
        }
        if let Some(mean) = mean_row(group) {
            out.push_str(&mean);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{CoapCounters, FrameCounters};
    use crate::time::SimTime;
    use crate::types::Scheme;

    fn snap(seed: u64, rtt: Option<f64>) -> MetricsSnapshot {
        MetricsSnapshot {
            scheme: Scheme::Mget,
            n_nodes: 10,
            seed,
            p_success: 1.0,
            p_eventual: 1.0,
            p_success_nodes: 1.0,
            rtt_mean: rtt,
            rtt_p95: rtt,
            rtt_samples: rtt.map_or(0, |_| 4),
            rtt_with_leisure_mean: rtt,
            energy_daily_per_node: 5.0,
            stale_probability: 0.25,
            outdated_probability: 0.5,
            frames: FrameCounters::default(),
            in_flight: 0,
            coap: CoapCounters::default(),
            dropped_by_gate: seed,
            sim_duration: SimTime::from_secs(3600),
        }
    }

    #[test]
    fn header_column_count_matches_rows() {
        let csv = write_csv(&[snap(1, Some(0.1))], &["v".into()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# v");
        let n = lines[1].split(',').count();
        assert!(lines[2..].iter().all(|l| l.split(',').count() == n));
        assert!(lines[1].starts_with("scheme,n_nodes,seed,p_success,rtt_mean_s,rtt_p95_s"));
    }

    #[test]
    fn missing_rtt_is_na_and_skipped_in_mean() {
        let csv = write_csv(&[snap(1, None), snap(2, Some(0.2))], &[]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1].split(',').nth(4), Some("NA"));
        let mean: Vec<&str> = lines[3].split(',').collect();
        assert_eq!(mean[2], "mean");
        assert_eq!(mean[4], "0.200000");
        assert_eq!(mean[15], "1.500000");
    }
}
