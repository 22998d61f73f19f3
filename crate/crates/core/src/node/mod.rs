//! A constrained server: one physical variable, the scheme-specific sending
//! logic, leisure for multicast replies and an optional congestion gate.
//!
//! Nodes do not touch the scheduler or the MAC directly; every handler
//! returns [`NodeAction`]s for the caller to carry out.

mod gate;
mod leisure;
mod observe;
mod variable;

use std::collections::HashMap;

pub use gate::{congestion_gate, GateDecision, NodeCongestionState};
pub use leisure::{LeisureConfig, LeisureDistribution};
pub use observe::ObserveRegistration;
pub use variable::PhysicalVariable;

use crate::coap::{
    CoapMessage, Code, Deduplicator, MessageIdAllocator, MessageType, RetxAction, RetxState,
    TokenAllocator, TransmissionParams,
};
use crate::error::{invalid, Result};
use crate::mac::{Dest, Endpoint};
use crate::rng::{RngStream, StreamId};
use crate::time::SimTime;
use crate::types::{FrameSizes, Packet, Scheme};

/// Size of the encoded sensor reading in a CoAP payload.
const VALUE_BYTES: u16 = 8;

#[derive(Clone, Debug)]
pub struct NodeConfig {
    pub scheme: Scheme,
    pub mean_lifetime: SimTime,
    pub frames: FrameSizes,
    /// Fraction of pushed messages (POSTs, notifications) sent confirmable.
    pub con_fraction: f64,
    pub gate_enabled: bool,
    pub coap: TransmissionParams,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig {
            scheme: Scheme::PostGet,
            mean_lifetime: SimTime::from_secs(60),
            frames: FrameSizes::default(),
            con_fraction: 0.0,
            gate_enabled: false,
            coap: TransmissionParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeTimer {
    VariableChange,
    Retransmit { message_id: u16 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeAction {
    /// Submit to the MAC now.
    Transmit {
        packet: Packet,
        length_bytes: u16,
    },
    /// Call [`Node::on_leisure_done`] with `packet` at `until`.
    Hold {
        packet: Packet,
        until: SimTime,
    },
    Timer {
        at: SimTime,
        timer: NodeTimer,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NodeStats {
    pub generated: u64,
    pub posts: u64,
    pub notifications: u64,
    pub get_responses: u64,
    pub mget_replies: u64,
    pub not_found: u64,
    pub gate_drops: u64,
    pub id_backpressure: u64,
    pub retransmissions: u64,
    pub con_given_up: u64,
    pub duplicates: u64,
}

#[derive(Clone, Debug)]
struct PendingCon {
    packet: Packet,
    length_bytes: u16,
    first_sent: SimTime,
    retx: RetxState,
}

pub struct Node {
    id: u32,
    cfg: NodeConfig,
    variable: PhysicalVariable,
    leisure: LeisureConfig,
    observe: ObserveRegistration,
    gate: NodeCongestionState,
    msg_ids: MessageIdAllocator,
    tokens: TokenAllocator,
    dedup: Deduplicator<Endpoint>,
    pending_con: HashMap<u16, PendingCon>,
    coap_rng: RngStream,
    leisure_rng: RngStream,
    stats: NodeStats,
}

impl Node {
    pub fn new(id: u32, cfg: NodeConfig, seed: u64, slot: SimTime, now: SimTime) -> Result<Self> {
        if !(0.0..=1.0).contains(&cfg.con_fraction) {
            return Err(invalid("con_fraction", "must lie in [0, 1]"));
        }
        let variable = PhysicalVariable::new(
            id,
            cfg.mean_lifetime,
            RngStream::new(seed, StreamId::NodeVariable(id)),
            now,
        )?;
        let lifetime = cfg.coap.non_lifetime().max(cfg.coap.exchange_lifetime());
        Ok(Node {
            id,
            variable,
            leisure: LeisureConfig::none(slot),
            observe: ObserveRegistration::new(),
            gate: NodeCongestionState::new(cfg.gate_enabled),
            msg_ids: MessageIdAllocator::new(lifetime),
            tokens: TokenAllocator::new(),
            dedup: Deduplicator::new(cfg.coap.exchange_lifetime()),
            pending_con: HashMap::new(),
            coap_rng: RngStream::new(seed, StreamId::NodeCoap(id)),
            leisure_rng: RngStream::new(seed, StreamId::NodeLeisure(id)),
            stats: NodeStats::default(),
            cfg,
        })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn endpoint(&self) -> Endpoint {
        Endpoint::Node(self.id)
    }

    pub fn variable(&self) -> &PhysicalVariable {
        &self.variable
    }

    pub fn leisure(&self) -> &LeisureConfig {
        &self.leisure
    }

    pub fn observe(&self) -> &ObserveRegistration {
        &self.observe
    }

    pub fn gate(&self) -> &NodeCongestionState {
        &self.gate
    }

    pub fn stats(&self) -> &NodeStats {
        &self.stats
    }

    /// Applies a leisure configuration pushed by the proxy.
    pub fn set_leisure(&mut self, leisure: LeisureConfig) {
        self.leisure = leisure;
    }

    /// The first variable-change timer.
    pub fn start(&self) -> NodeAction {
        NodeAction::Timer {
            at: self.variable.next_change_at(),
            timer: NodeTimer::VariableChange,
        }
    }

    fn proxy_message(
        &mut self,
        mtype: MessageType,
        code: Code,
        now: SimTime,
    ) -> Option<CoapMessage> {
        match self.msg_ids.next_message_id(now) {
            Ok(mid) => Some(CoapMessage::new(mtype, code, mid, self.tokens.next_token())),
            Err(_) => {
                self.stats.id_backpressure += 1;
                None
            }
        }
    }

    fn data_packet(&self, msg: CoapMessage) -> Packet {
        Packet::new(
            msg.with_etag(self.variable.value_tag())
                .with_payload_len(VALUE_BYTES),
            self.id,
        )
        .with_version(self.variable.version())
    }

    /// Passes a data transmission through the congestion gate and, for
    /// confirmable messages, arms the retransmission timer.
    fn transmit(
        &mut self,
        packet: Packet,
        length_bytes: u16,
        now: SimTime,
        out: &mut Vec<NodeAction>,
    ) {
        if congestion_gate(&mut self.gate, now) == GateDecision::Drop {
            self.stats.gate_drops += 1;
            return;
        }
        if packet.msg.mtype == MessageType::Con {
            let retx = RetxState::start(&self.cfg.coap, &mut self.coap_rng, now);
            let mid = packet.msg.message_id;
            out.push(NodeAction::Timer {
                at: retx.deadline_after(now),
                timer: NodeTimer::Retransmit { message_id: mid },
            });
            self.pending_con.insert(
                mid,
                PendingCon {
                    packet,
                    length_bytes,
                    first_sent: now,
                    retx,
                },
            );
        }
        out.push(NodeAction::Transmit {
            packet,
            length_bytes,
        });
    }

    fn push_type(&mut self) -> MessageType {
        if self.cfg.con_fraction > 0.0 && self.coap_rng.bernoulli(self.cfg.con_fraction) {
            MessageType::Con
        } else {
            MessageType::Non
        }
    }

    pub fn on_variable_change(&mut self, now: SimTime) -> Vec<NodeAction> {
        let next = self.variable.advance(now);
        self.stats.generated += 1;
        let mut out = vec![NodeAction::Timer {
            at: next,
            timer: NodeTimer::VariableChange,
        }];
        match self.cfg.scheme {
            Scheme::PostGet => {
                let mtype = self.push_type();
                if let Some(msg) = self.proxy_message(mtype, Code::Post, now) {
                    self.stats.posts += 1;
                    let p = self.data_packet(msg);
                    self.transmit(p, self.cfg.frames.data, now, &mut out);
                }
            }
            Scheme::ObserveGet if self.observe.is_active() => {
                let mtype = self.push_type();
                if let Some(mut msg) = self.proxy_message(mtype, Code::Content, now) {
                    msg.token = self.observe.token().expect("active registration");
                    let seq = self.observe.next_notification_seq();
                    self.stats.notifications += 1;
                    let mut p = self.data_packet(msg.with_observe(seq));
                    p.notification = true;
                    self.transmit(p, self.cfg.frames.data, now, &mut out);
                }
            }
            Scheme::ObserveGet | Scheme::Mget | Scheme::Idle => {}
        }
        out
    }

    /// A frame from the proxy reached this node intact.
    pub fn on_receive(
        &mut self,
        src: Endpoint,
        dst: Dest,
        packet: &Packet,
        now: SimTime,
    ) -> Vec<NodeAction> {
        let mut out = Vec::new();
        let msg = packet.msg;
        if msg.mtype == MessageType::Ack {
            if let Some(p) = self.pending_con.remove(&msg.message_id) {
                if p.retx.attempts_made == 0 {
                    self.gate
                        .record_rtt_sample(now.saturating_sub(p.first_sent));
                }
            }
            return out;
        }
        if self.dedup.is_duplicate(now, src, msg.message_id) {
            self.stats.duplicates += 1;
            return out;
        }
        if msg.code != Code::Get {
            return out;
        }
        if dst == Dest::Broadcast {
            let leisure = self.leisure.sample(&mut self.leisure_rng);
            if let Some(mut reply) = self.proxy_message(MessageType::Non, Code::Content, now) {
                reply.token = msg.token;
                let mut p = self.data_packet(reply);
                p.leisure_held = leisure;
                self.stats.mget_replies += 1;
                if leisure == SimTime::ZERO {
                    self.transmit(p, self.cfg.frames.data, now, &mut out);
                } else {
                    out.push(NodeAction::Hold {
                        packet: p,
                        until: now + leisure,
                    });
                }
            }
            return out;
        }
        let Some(mut reply) = self.proxy_message(MessageType::Non, Code::Content, now) else {
            return out;
        };
        reply.token = msg.token;
        if packet.resource != self.id {
            reply.code = Code::NotFound;
            self.stats.not_found += 1;
            self.transmit(
                Packet::new(reply, packet.resource),
                self.cfg.frames.request,
                now,
                &mut out,
            );
            return out;
        }
        match msg.options.observe {
            Some(0) => {
                let seq = self.observe.register(msg.token, src);
                reply = reply.with_observe(seq);
            }
            Some(_) => self.observe.deregister(),
            None => {}
        }
        self.stats.get_responses += 1;
        let p = self.data_packet(reply);
        self.transmit(p, self.cfg.frames.data, now, &mut out);
        out
    }

    /// A multicast reply finished its leisure.
    pub fn on_leisure_done(&mut self, packet: Packet, now: SimTime) -> Vec<NodeAction> {
        let mut out = Vec::new();
        self.transmit(packet, self.cfg.frames.data, now, &mut out);
        out
    }

    pub fn on_timer(&mut self, timer: NodeTimer, now: SimTime) -> Vec<NodeAction> {
        match timer {
            NodeTimer::VariableChange => self.on_variable_change(now),
            NodeTimer::Retransmit { message_id } => {
                let Some(p) = self.pending_con.get_mut(&message_id) else {
                    return Vec::new();
                };
                match p.retx.on_timeout(now) {
                    RetxAction::Retransmit { next_deadline } => {
                        self.stats.retransmissions += 1;
                        self.gate.last_tx_at = Some(now);
                        vec![
                            NodeAction::Timer {
                                at: next_deadline,
                                timer: NodeTimer::Retransmit { message_id },
                            },
                            NodeAction::Transmit {
                                packet: p.packet,
                                length_bytes: p.length_bytes,
                            },
                        ]
                    }
                    RetxAction::GiveUp => {
                        self.pending_con.remove(&message_id);
                        self.stats.con_given_up += 1;
                        Vec::new()
                    }
                }
            }
        }
    }

    pub fn pending_confirmable(&self) -> usize {
        self.pending_con.len()
    }
}
