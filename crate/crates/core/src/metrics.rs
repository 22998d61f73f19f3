//! Run observables.
//!
//! * `p_success`: share of unicast frames delivered on their first MAC
//!   attempt. Channel-access failures count as unsuccessful. `p_eventual` is
//!   the share delivered after any number of retries.
//! * RTT: from a proxy-initiated request leaving the proxy application to the
//!   matching reply reaching it, minus any leisure the node held the reply.
//!   The leisure-inclusive mean is reported separately. Observe
//!   notifications are never samples, even on a fresh registration token.
//! * `stale_probability`: time-averaged fraction of cache records whose last
//!   update is older than the freshness threshold. A record never updated is
//!   stale. `outdated_probability` is the same average over the age of each
//!   node's current value, i.e. of the generation process alone.
//!
//! Only frames submitted and samples taken after the warmup count.

use crate::error::{invalid, Result};
use crate::mac::{MacOutcome, MacStatus};
use crate::time::SimTime;
use crate::types::Scheme;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Scales energy drawn over `window` by `n` nodes to joules per node per day.
pub fn daily_energy(total_joules: f64, n_nodes: u32, window: SimTime) -> Result<f64> {
    if n_nodes == 0 {
        return Err(invalid("n_nodes", "must be positive"));
    }
    if window == SimTime::ZERO {
        return Err(invalid("window", "must be positive"));
    }
    Ok(total_joules / n_nodes as f64 / window.as_secs_f64() * SECONDS_PER_DAY)
}

/// Exact time integral of "age > threshold" over a population of items that
/// are refreshed at discrete instants.
#[derive(Clone, Debug)]
pub struct AgeTracker {
    threshold: SimTime,
    from: SimTime,
    last: Vec<Option<SimTime>>,
    over: u128,
}

impl AgeTracker {
    /// Items start without any refresh; only time after `from` is counted.
    pub fn new(items: usize, threshold: SimTime, from: SimTime) -> Self {
        AgeTracker {
            threshold,
            from,
            last: vec![None; items],
            over: 0,
        }
    }

    /// Items whose last refresh happened at `at`.
    pub fn with_initial(items: usize, threshold: SimTime, from: SimTime, at: SimTime) -> Self {
        AgeTracker {
            last: vec![Some(at); items],
            ..Self::new(items, threshold, from)
        }
    }

    fn over_between(&self, item: usize, until: SimTime) -> u64 {
        let start = match self.last[item] {
            None => SimTime::ZERO,
            Some(t) => t.saturating_add(self.threshold),
        };
        let start = start.max(self.from);
        until.saturating_sub(start).ticks()
    }

    pub fn refresh(&mut self, item: usize, now: SimTime) {
        self.over += self.over_between(item, now) as u128;
        self.last[item] = Some(now);
    }

    pub fn is_over(&self, item: usize, now: SimTime) -> bool {
        match self.last[item] {
            None => true,
            Some(t) => now.saturating_sub(t) > self.threshold,
        }
    }

    /// Fraction of item-time in `[from, end]` spent over the threshold.
    pub fn fraction(&self, end: SimTime) -> f64 {
        let window = end.saturating_sub(self.from).ticks() as u128 * self.last.len() as u128;
        if window == 0 {
            return 0.0;
        }
        let open: u128 = (0..self.last.len())
            .map(|i| self.over_between(i, end) as u128)
            .sum();
        (self.over + open) as f64 / window as f64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrameCounters {
    pub offered: u64,
    pub delivered: u64,
    pub broadcast_sent: u64,
    pub retry_exhausted: u64,
    pub channel_access_failures: u64,
    pub unicast_completed: u64,
    pub first_attempt_delivered: u64,
    /// The two counters above restricted to frames sent by nodes.
    pub node_unicast_completed: u64,
    pub node_first_attempt_delivered: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CoapCounters {
    pub refresh_requests: u64,
    pub refresh_timeouts: u64,
    pub mgets: u64,
    pub mget_replies: u64,
    pub unmatched_tokens: u64,
    pub late_replies: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSnapshot {
    pub scheme: Scheme,
    pub n_nodes: u32,
    pub seed: u64,
    pub p_success: f64,
    pub p_eventual: f64,
    pub p_success_nodes: f64,
    pub rtt_mean: Option<f64>,
    pub rtt_p95: Option<f64>,
    pub rtt_samples: u64,
    pub rtt_with_leisure_mean: Option<f64>,
    pub energy_daily_per_node: f64,
    pub stale_probability: f64,
    pub outdated_probability: f64,
    pub frames: FrameCounters,
    pub in_flight: u64,
    pub coap: CoapCounters,
    pub dropped_by_gate: u64,
    pub sim_duration: SimTime,
}

impl MetricsSnapshot {
    pub fn offered_frames(&self) -> u64 {
        self.frames.offered
    }

    pub fn unmatched_tokens(&self) -> u64 {
        self.coap.unmatched_tokens
    }
}

/// Accumulators for one run.
#[derive(Clone, Debug)]
pub struct Metrics {
    n_nodes: u32,
    warmup: SimTime,
    frames: FrameCounters,
    coap: CoapCounters,
    pub(crate) rtt: Vec<f64>,
    rtt_with_leisure: Vec<f64>,
    stale: AgeTracker,
    outdated: AgeTracker,
    energy_at_warmup: Option<f64>,
    gate_drops_at_warmup: u64,
}

impl Metrics {
    pub fn new(n_nodes: u32, threshold: SimTime, warmup: SimTime) -> Self {
        let n = n_nodes as usize;
        Metrics {
            n_nodes,
            warmup,
            frames: FrameCounters::default(),
            coap: CoapCounters::default(),
            rtt: Vec::new(),
            rtt_with_leisure: Vec::new(),
            stale: AgeTracker::new(n, threshold, warmup),
            outdated: AgeTracker::with_initial(n, threshold, warmup, SimTime::ZERO),
            energy_at_warmup: None,
            gate_drops_at_warmup: 0,
        }
    }

    pub fn warmup(&self) -> SimTime {
        self.warmup
    }

    pub fn in_window(&self, t: SimTime) -> bool {
        t >= self.warmup
    }

    pub fn frames(&self) -> &FrameCounters {
        &self.frames
    }

    pub fn coap(&self) -> &CoapCounters {
        &self.coap
    }

    pub fn coap_mut(&mut self, now: SimTime) -> Option<&mut CoapCounters> {
        self.in_window(now).then_some(&mut self.coap)
    }

    pub fn record_submit(&mut self, submitted_at: SimTime) {
        if self.in_window(submitted_at) {
            self.frames.offered += 1;
        }
    }

    pub fn record_mac_attempt(
        &mut self,
        submitted_at: SimTime,
        from_node: bool,
        outcome: &MacOutcome,
    ) {
        if !self.in_window(submitted_at) {
            return;
        }
        let f = &mut self.frames;
        match outcome.status {
            MacStatus::Delivered => f.delivered += 1,
            MacStatus::BroadcastSent => f.broadcast_sent += 1,
            MacStatus::RetryExhausted => f.retry_exhausted += 1,
            MacStatus::ChannelAccessFailure => f.channel_access_failures += 1,
        }
        if outcome.status != MacStatus::BroadcastSent {
            let first = outcome.first_attempt_success() as u64;
            f.unicast_completed += 1;
            f.first_attempt_delivered += first;
            if from_node {
                f.node_unicast_completed += 1;
                f.node_first_attempt_delivered += first;
            }
        }
    }

    /// One request/reply round trip observed by the proxy.
    pub fn record_rtt(&mut self, sent_at: SimTime, arrival: SimTime, leisure: SimTime) {
        if !self.in_window(sent_at) {
            return;
        }
        let full = arrival.saturating_sub(sent_at);
        self.rtt_with_leisure.push(full.as_secs_f64());
        self.rtt.push(full.saturating_sub(leisure).as_secs_f64());
    }

    pub fn record_cache_update(&mut self, resource: u32, now: SimTime) {
        self.stale.refresh(resource as usize, now);
    }

    pub fn record_generation(&mut self, node: u32, now: SimTime) {
        self.outdated.refresh(node as usize, now);
    }

    /// Snapshot of cumulative totals at the end of the warmup.
    pub fn mark_warmup(&mut self, total_node_energy: f64, gate_drops: u64) {
        self.energy_at_warmup = Some(total_node_energy);
        self.gate_drops_at_warmup = gate_drops;
    }

    #[allow(clippy::too_many_arguments)]
    pub fn finalize(
        &self,
        scheme: Scheme,
        seed: u64,
        end: SimTime,
        total_node_energy: f64,
        gate_drops: u64,
        in_flight: u64,
    ) -> Result<MetricsSnapshot> {
        if end <= self.warmup {
            return Err(invalid(
                "warmup_s",
                format!(
                    "warmup {} must be shorter than the run ({end})",
                    self.warmup
                ),
            ));
        }
        let window = end - self.warmup;
        let e0 = self.energy_at_warmup.unwrap_or(0.0);
        let energy = daily_energy(total_node_energy - e0, self.n_nodes, window)?;
        let f = &self.frames;
        let ratio = |a: u64, b: u64| if b == 0 { 1.0 } else { a as f64 / b as f64 };
        Ok(MetricsSnapshot {
            scheme,
            n_nodes: self.n_nodes,
            seed,
            p_success: ratio(f.first_attempt_delivered, f.unicast_completed),
            p_eventual: ratio(f.delivered, f.unicast_completed),
            p_success_nodes: ratio(f.node_first_attempt_delivered, f.node_unicast_completed),
            rtt_mean: mean(&self.rtt),
            rtt_p95: percentile(&self.rtt, 0.95),
            rtt_samples: self.rtt.len() as u64,
            rtt_with_leisure_mean: mean(&self.rtt_with_leisure),
            energy_daily_per_node: energy,
            stale_probability: self.stale.fraction(end),
            outdated_probability: self.outdated.fraction(end),
            frames: *f,
            in_flight,
            coap: self.coap,
            dropped_by_gate: gate_drops - self.gate_drops_at_warmup,
            sim_duration: end,
        })
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Nearest-rank percentile.
pub fn percentile(xs: &[f64], q: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (q * v.len() as f64).ceil().max(1.0) as usize;
    Some(v[rank.min(v.len()) - 1])
}
