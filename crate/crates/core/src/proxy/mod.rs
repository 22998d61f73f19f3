//! The caching proxy: cache records with freshness estimation, the staged
//! service pipeline and the three cache-maintenance schemes.

mod cache;
mod estimator;
mod pipeline;

use std::collections::HashMap;

pub use cache::{CacheRecord, PendingRefresh};
pub use estimator::{adjust_t, EstimatorParams, FreshnessEstimator, TAdjust};
pub use pipeline::{Direction, Pipeline, QueueingStation, StageStep};

use crate::coap::{
    token_release_count_for, CoapMessage, Code, MessageIdAllocator, MessageType, MgetTokenTable,
    Token, TokenAllocator, TransmissionParams,
};
use crate::error::{invalid, Result};
use crate::mac::{Dest, Endpoint};
use crate::metrics::Metrics;
use crate::node::{LeisureConfig, LeisureDistribution};
use crate::time::SimTime;
use crate::types::{FrameSizes, Packet, Scheme};

/// Resource id carried by multicast requests, which address the whole group.
pub const GROUP_RESOURCE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct ProxyConfig {
    pub scheme: Scheme,
    pub n_nodes: u32,
    pub freshness_threshold: SimTime,
    /// Stale records needed to trigger a multicast GET.
    pub k: u32,
    pub check_interval: SimTime,
    /// Master switch for proactive refreshes.
    pub refresh: bool,
    /// Under post-get, also validate stale records with unicast GETs.
    pub validation_gets: bool,
    /// How long a unicast refresh may stay unanswered.
    pub refresh_timeout: SimTime,
    pub mget_min_gap: SimTime,
    /// Part of the gap between multicast GETs reserved for request and reply
    /// transit when sizing the token release count.
    pub transit_allowance: SimTime,
    pub epsilon_token: f64,
    pub estimator: EstimatorParams,
    /// Adapt `t` to the refresh-timeout rate.
    pub congestion: Option<TAdjust>,
    pub frames: FrameSizes,
}

impl ProxyConfig {
    pub fn new(scheme: Scheme, n_nodes: u32) -> Self {
        ProxyConfig {
            scheme,
            n_nodes,
            freshness_threshold: SimTime::from_secs(60),
            k: 1,
            check_interval: SimTime::from_secs(1),
            refresh: true,
            validation_gets: true,
            refresh_timeout: SimTime::from_secs(5),
            mget_min_gap: SimTime::from_secs(60),
            transit_allowance: SimTime::from_secs(1),
            epsilon_token: 1e-3,
            estimator: EstimatorParams::default(),
            congestion: None,
            frames: FrameSizes::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(invalid("n_nodes", "must be at least 1"));
        }
        if self.k == 0 || self.k > self.n_nodes {
            return Err(invalid(
                "k",
                format!("must lie in [1, n_nodes = {}]", self.n_nodes),
            ));
        }
        if self.check_interval == SimTime::ZERO {
            return Err(invalid("check_interval_s", "must be positive"));
        }
        if self.mget_min_gap <= self.transit_allowance {
            return Err(invalid(
                "mget_min_gap_s",
                format!(
                    "must exceed the transit allowance {}",
                    self.transit_allowance
                ),
            ));
        }
        if !(self.epsilon_token > 0.0 && self.epsilon_token < 1.0) {
            return Err(invalid("epsilon_token", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Duty cycle `min(1, coefficient * n)` and the matching leisure, sized so
/// the mean leisure is that share of the period between multicast GETs.
pub fn configure_leisure(
    n_nodes: u32,
    coefficient: f64,
    distribution: LeisureDistribution,
    slot: SimTime,
    mget_period: SimTime,
) -> Result<LeisureConfig> {
    if n_nodes == 0 {
        return Err(invalid("n_nodes", "must be at least 1"));
    }
    if coefficient.is_nan() || coefficient <= 0.0 {
        return Err(invalid("duty_cycle_coefficient", "must be positive"));
    }
    let duty = (coefficient * n_nodes as f64).min(1.0);
    LeisureConfig::for_duty_cycle(distribution, slot, duty, mget_period)
}

/// A downlink message for the pipeline and then the MAC.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outgoing {
    pub packet: Packet,
    pub dst: Dest,
    pub length_bytes: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Probe {
    node: u32,
    sent_at: SimTime,
    expires_at: SimTime,
}

pub struct Proxy {
    cfg: ProxyConfig,
    records: Vec<CacheRecord>,
    msg_ids: MessageIdAllocator,
    tokens: TokenAllocator,
    mget_tokens: MgetTokenTable,
    probes: HashMap<Token, Probe>,
    release_after: u32,
    leisure_max: SimTime,
    last_mget_at: Option<SimTime>,
    timeout_signal: f64,
    t: f64,
}

impl Proxy {
    /// `leisure` is the configuration the nodes reply to multicast GETs with.
    pub fn new(
        cfg: ProxyConfig,
        coap: &TransmissionParams,
        leisure: &LeisureConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let gap = cfg.mget_min_gap - cfg.transit_allowance;
        let release_after = token_release_count_for(leisure, gap, cfg.epsilon_token)?;
        Ok(Proxy {
            records: (0..cfg.n_nodes)
                .map(|i| CacheRecord::new(i, cfg.estimator))
                .collect(),
            msg_ids: MessageIdAllocator::new(coap.non_lifetime().max(coap.exchange_lifetime())),
            tokens: TokenAllocator::new(),
            mget_tokens: MgetTokenTable::new(),
            probes: HashMap::new(),
            release_after,
            leisure_max: leisure.max(),
            last_mget_at: None,
            timeout_signal: 0.0,
            t: cfg.estimator.t,
            cfg,
        })
    }

    pub fn config(&self) -> &ProxyConfig {
        &self.cfg
    }

    pub fn records(&self) -> &[CacheRecord] {
        &self.records
    }

    pub fn release_after(&self) -> u32 {
        self.release_after
    }

    pub fn mget_tokens(&self) -> &MgetTokenTable {
        &self.mget_tokens
    }

    pub fn outstanding_probes(&self) -> usize {
        self.probes.len()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    fn message(&mut self, mtype: MessageType, code: Code, now: SimTime) -> Option<CoapMessage> {
        let mid = self.msg_ids.next_message_id(now).ok()?;
        Some(CoapMessage::new(mtype, code, mid, self.tokens.next_token()))
    }

    fn request(&mut self, node: u32, observe: bool, now: SimTime) -> Option<Outgoing> {
        let mut msg = self.message(MessageType::Non, Code::Get, now)?;
        if observe {
            msg = msg.with_observe(0);
        }
        let expires_at = now + self.cfg.refresh_timeout;
        self.probes.insert(
            msg.token,
            Probe {
                node,
                sent_at: now,
                expires_at,
            },
        );
        self.records[node as usize].pending = Some(PendingRefresh {
            token: msg.token,
            since: now,
            expires_at,
        });
        Some(Outgoing {
            packet: Packet::new(msg, node),
            dst: Dest::Unicast(Endpoint::Node(node)),
            length_bytes: self.cfg.frames.request,
        })
    }

    /// Registration GETs to every node (observe-get only).
    pub fn bootstrap(&mut self, now: SimTime) -> Vec<Outgoing> {
        if self.cfg.scheme != Scheme::ObserveGet {
            return Vec::new();
        }
        (0..self.cfg.n_nodes)
            .filter_map(|i| self.request(i, true, now))
            .collect()
    }

    fn refresh_due(&self, r: &CacheRecord, now: SimTime) -> bool {
        if r.pending.is_some() {
            return false;
        }
        let limit = match (self.cfg.congestion, r.max_age()) {
            (Some(_), Some(max_age)) => max_age.max(self.cfg.freshness_threshold),
            _ => self.cfg.freshness_threshold,
        };
        r.age(now).is_none_or(|a| a > limit)
    }

    fn expire(&mut self, now: SimTime, m: &mut Metrics) {
        let mut timeouts = 0u64;
        self.probes.retain(|_, p| {
            let live = p.expires_at > now;
            timeouts += !live as u64;
            live
        });
        for r in &mut self.records {
            if r.pending.is_some_and(|p| p.expires_at <= now) {
                r.pending = None;
            }
        }
        if let Some(c) = m.coap_mut(now) {
            c.refresh_timeouts += timeouts;
        }
        if self.cfg.congestion.is_some() && timeouts > 0 {
            self.timeout_signal += (1.0 - self.timeout_signal) / 8.0;
        }
    }

    /// Periodic freshness check; returns the refresh requests to send.
    pub fn check_freshness(&mut self, now: SimTime, m: &mut Metrics) -> Vec<Outgoing> {
        self.expire(now, m);
        if !self.cfg.refresh {
            return Vec::new();
        }
        if let Some(c) = self.cfg.congestion {
            let t = adjust_t(self.t, self.timeout_signal, &c);
            if t != self.t {
                self.t = t;
                for r in &mut self.records {
                    r.estimator.set_t(t);
                }
            }
        }
        let due: Vec<u32> = self
            .records
            .iter()
            .filter(|r| self.refresh_due(r, now))
            .map(|r| r.resource)
            .collect();
        let mut out = Vec::new();
        match self.cfg.scheme {
            Scheme::PostGet if self.cfg.validation_gets => {
                out.extend(due.into_iter().filter_map(|i| self.request(i, false, now)));
            }
            Scheme::ObserveGet => {
                out.extend(due.into_iter().filter_map(|i| self.request(i, true, now)));
            }
            Scheme::Mget => {
                let gap_ok = self
                    .last_mget_at
                    .is_none_or(|t| now.saturating_sub(t) >= self.cfg.mget_min_gap);
                if due.len() as u64 >= self.cfg.k as u64 && gap_ok {
                    if let Some(msg) = self.message(MessageType::Non, Code::Get, now) {
                        self.mget_tokens.issue(msg.token, now, self.release_after);
                        self.last_mget_at = Some(now);
                        let expires_at = now + self.leisure_max + self.cfg.refresh_timeout;
                        for r in &mut self.records {
                            r.pending = Some(PendingRefresh {
                                token: msg.token,
                                since: now,
                                expires_at,
                            });
                        }
                        if let Some(c) = m.coap_mut(now) {
                            c.mgets += 1;
                        }
                        out.push(Outgoing {
                            packet: Packet::new(msg, GROUP_RESOURCE),
                            dst: Dest::Broadcast,
                            length_bytes: self.cfg.frames.request,
                        });
                    }
                }
            }
            Scheme::PostGet | Scheme::Idle => {}
        }
        if self.cfg.scheme != Scheme::Mget {
            if let Some(c) = m.coap_mut(now) {
                c.refresh_requests += out.len() as u64;
            }
        }
        out
    }

    fn update(&mut self, packet: &Packet, now: SimTime, m: &mut Metrics) {
        let Some(r) = self.records.get_mut(packet.resource as usize) else {
            return;
        };
        r.on_data_arrival(packet.version, packet.msg.options.etag, now);
        m.record_cache_update(packet.resource, now);
    }

    fn reply(&mut self, to: Endpoint, msg: CoapMessage, resource: u32) -> Outgoing {
        Outgoing {
            packet: Packet::new(msg, resource),
            dst: Dest::Unicast(to),
            length_bytes: self.cfg.frames.request,
        }
    }

    /// A message from a node left the uplink pipeline.
    pub fn on_uplink(
        &mut self,
        src: Endpoint,
        packet: &Packet,
        now: SimTime,
        m: &mut Metrics,
    ) -> Vec<Outgoing> {
        let msg = packet.msg;
        let mut out = Vec::new();
        match msg.code {
            Code::Post => {
                self.update(packet, now, m);
                let created = if msg.mtype == MessageType::Con {
                    let mut ack = CoapMessage::empty_ack(msg.message_id);
                    ack.code = Code::Created;
                    Some(ack)
                } else {
                    self.message(MessageType::Non, Code::Created, now)
                };
                if let Some(mut c) = created {
                    c.token = msg.token;
                    out.push(self.reply(src, c, packet.resource));
                }
            }
            Code::Content => {
                if msg.mtype == MessageType::Con {
                    let ack = CoapMessage::empty_ack(msg.message_id);
                    out.push(self.reply(src, ack, packet.resource));
                }
                if let Some(p) = self.probes.remove(&msg.token) {
                    if !packet.notification {
                        let rtt = now.saturating_sub(p.sent_at);
                        m.record_rtt(p.sent_at, now, packet.leisure_held);
                        if let Some(r) = self.records.get_mut(p.node as usize) {
                            r.estimator
                                .measure_rtt_p(rtt.saturating_sub(packet.leisure_held));
                        }
                    }
                    if self.cfg.congestion.is_some() {
                        self.timeout_signal -= self.timeout_signal / 8.0;
                    }
                    self.update(packet, now, m);
                } else if self.cfg.scheme == Scheme::Mget {
                    match self.mget_tokens.lookup(msg.token) {
                        Some(e) => {
                            let issued_at = e.issued_at;
                            m.record_rtt(issued_at, now, packet.leisure_held);
                            if let Some(r) = self.records.get_mut(packet.resource as usize) {
                                r.estimator.measure_rtt_p(
                                    now.saturating_sub(issued_at)
                                        .saturating_sub(packet.leisure_held),
                                );
                            }
                            if let Some(c) = m.coap_mut(now) {
                                c.mget_replies += 1;
                            }
                            self.update(packet, now, m);
                        }
                        None => {
                            if let Some(c) = m.coap_mut(now) {
                                c.unmatched_tokens += 1;
                            }
                        }
                    }
                } else {
                    if msg.options.observe.is_none() {
                        if let Some(c) = m.coap_mut(now) {
                            c.late_replies += 1;
                        }
                    }
                    self.update(packet, now, m);
                }
            }
            _ => {}
        }
        out
    }
}

#[cfg(test)]
mod tests;
