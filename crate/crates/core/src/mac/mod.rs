//! Single-hop IEEE 802.15.4 medium: unslotted CSMA/CA, MAC acknowledgements
//! and retries, overlap collisions and per-radio energy accounting.

mod channel;
mod energy;
mod params;

use std::collections::VecDeque;

pub use channel::{Channel, TxId};
pub use energy::{EnergyMeter, EnergyRates, RadioState};
pub use params::{frame_airtime, CsmaParams, MAX_FRAME_BYTES};

use crate::engine::{EventHandle, Scheduler};
use crate::error::{invalid, Result};
use crate::rng::{RngStream, StreamId};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Node(u32),
    Proxy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dest {
    Unicast(Endpoint),
    Broadcast,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacFrame<P> {
    pub src: Endpoint,
    pub dst: Dest,
    pub length_bytes: u16,
    pub payload: P,
    pub requires_ack: bool,
}

impl<P> MacFrame<P> {
    pub fn unicast(src: Endpoint, dst: Endpoint, length_bytes: u16, payload: P) -> Self {
        MacFrame {
            src,
            dst: Dest::Unicast(dst),
            length_bytes,
            payload,
            requires_ack: true,
        }
    }

    pub fn broadcast(src: Endpoint, length_bytes: u16, payload: P) -> Self {
        MacFrame {
            src,
            dst: Dest::Broadcast,
            length_bytes,
            payload,
            requires_ack: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MacStatus {
    Delivered,
    ChannelAccessFailure,
    RetryExhausted,
    /// Sent once without acknowledgement (broadcast, or unicast without ACK).
    BroadcastSent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MacOutcome {
    pub status: MacStatus,
    /// Number of times the frame went on air.
    pub attempts_used: u32,
    pub completion_time: SimTime,
}

impl MacOutcome {
    pub fn first_attempt_success(&self) -> bool {
        self.status == MacStatus::Delivered && self.attempts_used == 1
    }
}

/// Timer events owned by the MAC. Embed them in the simulation's event type
/// via `From<MacEvent>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MacEvent {
    BackoffDone {
        station: u32,
    },
    CcaDone {
        station: u32,
    },
    TxStart {
        station: u32,
    },
    TxEnd {
        station: u32,
        tx: TxId,
    },
    AckStart {
        from: u32,
        to: u32,
        attempt: u64,
    },
    AckEnd {
        from: u32,
        to: u32,
        tx: TxId,
        attempt: u64,
    },
    AckTimeout {
        station: u32,
        attempt: u64,
    },
    JamEnd {
        tx: TxId,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum MacIndication<P> {
    /// A clean frame reached its receiver(s). For broadcast every node hears it.
    Received {
        src: Endpoint,
        dst: Dest,
        payload: P,
    },
    Completed {
        station: Endpoint,
        frame: MacFrame<P>,
        outcome: MacOutcome,
        submitted_at: SimTime,
    },
}

struct InFlight<P> {
    frame: MacFrame<P>,
    submitted_at: SimTime,
    airtime: SimTime,
    nb: u32,
    be: u32,
    retries: u32,
    attempts: u32,
    cca_start: SimTime,
    awaiting_ack: Option<u64>,
    ack_timer: Option<EventHandle>,
}

struct Station<P> {
    queue: VecDeque<(MacFrame<P>, SimTime)>,
    current: Option<InFlight<P>>,
    rng: RngStream,
    meter: EnergyMeter,
    /// The radio owes an ACK until this instant and cannot start a CCA.
    ack_busy_until: SimTime,
}

/// All radios sharing the medium. Station `i < n` is node `i`; station `n` is
/// the proxy.
pub struct Mac<P> {
    params: CsmaParams,
    channel: Channel,
    stations: Vec<Station<P>>,
    n_nodes: u32,
    next_attempt: u64,
}

impl<P: Clone> Mac<P> {
    pub fn new(n_nodes: u32, params: CsmaParams, rates: EnergyRates, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut stations = Vec::with_capacity(n_nodes as usize + 1);
        for i in 0..=n_nodes {
            let stream = if i == n_nodes {
                StreamId::ProxyMac
            } else {
                StreamId::NodeMac(i)
            };
            stations.push(Station {
                queue: VecDeque::new(),
                current: None,
                rng: RngStream::new(seed, stream),
                meter: EnergyMeter::new(rates),
                ack_busy_until: SimTime::ZERO,
            });
        }
        Ok(Mac {
            params,
            channel: Channel::new(),
            stations,
            n_nodes,
            next_attempt: 0,
        })
    }

    /// Turns on transition logging for every radio.
    pub fn with_energy_log(mut self) -> Self {
        for st in &mut self.stations {
            st.meter = st.meter.clone().with_log();
        }
        self
    }

    pub fn params(&self) -> &CsmaParams {
        &self.params
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn n_nodes(&self) -> u32 {
        self.n_nodes
    }

    fn index(&self, ep: Endpoint) -> u32 {
        match ep {
            Endpoint::Node(i) => {
                assert!(i < self.n_nodes, "unknown node {i}");
                i
            }
            Endpoint::Proxy => self.n_nodes,
        }
    }

    fn endpoint(&self, station: u32) -> Endpoint {
        if station == self.n_nodes {
            Endpoint::Proxy
        } else {
            Endpoint::Node(station)
        }
    }

    pub fn meter(&self, ep: Endpoint) -> &EnergyMeter {
        &self.stations[self.index(ep) as usize].meter
    }

    pub fn energy_report(&self, ep: Endpoint, at: SimTime) -> f64 {
        self.meter(ep).energy_report(at)
    }

    pub fn queue_len(&self, ep: Endpoint) -> usize {
        let st = &self.stations[self.index(ep) as usize];
        st.queue.len() + st.current.is_some() as usize
    }

    /// Submission times of every frame that has not completed yet.
    pub fn in_flight_submissions(&self) -> impl Iterator<Item = SimTime> + '_ {
        self.stations.iter().flat_map(|st| {
            st.current
                .as_ref()
                .map(|c| c.submitted_at)
                .into_iter()
                .chain(st.queue.iter().map(|(_, t)| *t))
        })
    }

    /// Queues a frame at its source station; CSMA starts if the radio is idle.
    pub fn submit<E: From<MacEvent>>(
        &mut self,
        frame: MacFrame<P>,
        sched: &mut Scheduler<E>,
    ) -> Result<()> {
        frame_airtime(frame.length_bytes, &self.params)?;
        if frame.dst == Dest::Broadcast && frame.requires_ack {
            return Err(invalid(
                "requires_ack",
                "broadcast frames are never acknowledged",
            ));
        }
        if let Dest::Unicast(dst) = frame.dst {
            if dst == frame.src {
                return Err(invalid("dst", "frame addressed to its own source"));
            }
            self.index(dst);
        }
        let station = self.index(frame.src);
        let now = sched.now();
        self.stations[station as usize]
            .queue
            .push_back((frame, now));
        if self.stations[station as usize].current.is_none() {
            self.start_next(station, sched);
        }
        Ok(())
    }

    /// Occupies the medium for `duration` without any station behind it.
    pub fn jam<E: From<MacEvent>>(&mut self, duration: SimTime, sched: &mut Scheduler<E>) {
        let tx = self.channel.begin(sched.now());
        sched.schedule_in(duration, MacEvent::JamEnd { tx }.into());
    }

    fn start_next<E: From<MacEvent>>(&mut self, station: u32, sched: &mut Scheduler<E>) {
        let now = sched.now();
        let st = &mut self.stations[station as usize];
        debug_assert!(st.current.is_none());
        let Some((frame, submitted_at)) = st.queue.pop_front() else {
            return;
        };
        let airtime = frame_airtime(frame.length_bytes, &self.params).expect("validated on submit");
        st.meter.begin_rx(now);
        st.current = Some(InFlight {
            frame,
            submitted_at,
            airtime,
            nb: 0,
            be: self.params.min_be,
            retries: 0,
            attempts: 0,
            cca_start: now,
            awaiting_ack: None,
            ack_timer: None,
        });
        self.backoff(station, sched);
    }

    fn backoff<E: From<MacEvent>>(&mut self, station: u32, sched: &mut Scheduler<E>) {
        let unit = self.params.backoff_unit;
        let st = &mut self.stations[station as usize];
        let cur = st.current.as_ref().expect("backoff without a frame");
        let window = (1u64 << cur.be) - 1;
        let slots = st.rng.uniform_inclusive(window);
        sched.schedule_in(unit * slots, MacEvent::BackoffDone { station }.into());
    }

    fn complete(
        &mut self,
        station: u32,
        status: MacStatus,
        now: SimTime,
        out: &mut Vec<MacIndication<P>>,
    ) -> bool {
        let ep = self.endpoint(station);
        let st = &mut self.stations[station as usize];
        let cur = st.current.take().expect("completing without a frame");
        st.meter.end_rx(now);
        out.push(MacIndication::Completed {
            station: ep,
            outcome: MacOutcome {
                status,
                attempts_used: cur.attempts,
                completion_time: now,
            },
            frame: cur.frame,
            submitted_at: cur.submitted_at,
        });
        !st.queue.is_empty()
    }

    fn finish<E: From<MacEvent>>(
        &mut self,
        station: u32,
        status: MacStatus,
        sched: &mut Scheduler<E>,
        out: &mut Vec<MacIndication<P>>,
    ) {
        if self.complete(station, status, sched.now(), out) {
            self.start_next(station, sched);
        }
    }

    fn rx_targets(&self, dst: Dest, src: u32) -> Vec<u32> {
        match dst {
            Dest::Unicast(ep) => vec![self.index(ep)],
            Dest::Broadcast => (0..=self.n_nodes).filter(|&i| i != src).collect(),
        }
    }

    /// Advances the MAC state machine for one of its timer events.
    pub fn handle<E: From<MacEvent>>(
        &mut self,
        ev: MacEvent,
        sched: &mut Scheduler<E>,
        out: &mut Vec<MacIndication<P>>,
    ) {
        let now = sched.now();
        match ev {
            MacEvent::BackoffDone { station } => {
                let st = &mut self.stations[station as usize];
                if now < st.ack_busy_until {
                    let at = st.ack_busy_until;
                    sched
                        .schedule(at, MacEvent::BackoffDone { station }.into())
                        .expect("ack ends in the future");
                    return;
                }
                let cur = st.current.as_mut().expect("backoff for idle station");
                cur.cca_start = now;
                sched.schedule_in(
                    self.params.cca_duration,
                    MacEvent::CcaDone { station }.into(),
                );
            }
            MacEvent::CcaDone { station } => {
                let busy = {
                    let cur = self.stations[station as usize].current.as_ref().unwrap();
                    self.channel.busy_since(cur.cca_start)
                };
                if !busy {
                    sched.schedule_in(self.params.turnaround, MacEvent::TxStart { station }.into());
                    return;
                }
                let max_be = self.params.max_be;
                let cur = self.stations[station as usize].current.as_mut().unwrap();
                cur.nb += 1;
                cur.be = (cur.be + 1).min(max_be);
                if cur.nb > self.params.max_csma_backoffs {
                    self.finish(station, MacStatus::ChannelAccessFailure, sched, out);
                } else {
                    self.backoff(station, sched);
                }
            }
            MacEvent::TxStart { station } => {
                let tx = self.channel.begin(now);
                let st = &mut self.stations[station as usize];
                st.meter.begin_tx(now);
                let cur = st.current.as_mut().unwrap();
                cur.attempts += 1;
                let (airtime, dst) = (cur.airtime, cur.frame.dst);
                for r in self.rx_targets(dst, station) {
                    self.stations[r as usize].meter.begin_rx(now);
                }
                sched.schedule_in(airtime, MacEvent::TxEnd { station, tx }.into());
            }
            MacEvent::TxEnd { station, tx } => {
                let corrupted = self.channel.end(tx, now);
                let (dst, requires_ack, src_ep) = {
                    let st = &mut self.stations[station as usize];
                    st.meter.end_tx(now);
                    let cur = st.current.as_ref().unwrap();
                    (cur.frame.dst, cur.frame.requires_ack, cur.frame.src)
                };
                for r in self.rx_targets(dst, station) {
                    self.stations[r as usize].meter.end_rx(now);
                }
                if !corrupted {
                    let payload = self.stations[station as usize]
                        .current
                        .as_ref()
                        .unwrap()
                        .frame
                        .payload
                        .clone();
                    out.push(MacIndication::Received {
                        src: src_ep,
                        dst,
                        payload,
                    });
                }
                match (dst, requires_ack) {
                    (Dest::Unicast(to), true) => {
                        let attempt = self.next_attempt;
                        self.next_attempt += 1;
                        let ack_wait = self.params.ack_wait;
                        let timer = sched.schedule_in(
                            ack_wait,
                            MacEvent::AckTimeout { station, attempt }.into(),
                        );
                        let cur = self.stations[station as usize].current.as_mut().unwrap();
                        cur.awaiting_ack = Some(attempt);
                        cur.ack_timer = Some(timer);
                        if !corrupted {
                            let from = self.index(to);
                            let ack_end =
                                now + self.params.backoff_unit + self.params.ack_airtime();
                            let rx = &mut self.stations[from as usize];
                            rx.meter.begin_rx(now);
                            rx.ack_busy_until = ack_end;
                            sched.schedule_in(
                                self.params.backoff_unit,
                                MacEvent::AckStart {
                                    from,
                                    to: station,
                                    attempt,
                                }
                                .into(),
                            );
                        }
                    }
                    _ => self.finish(station, MacStatus::BroadcastSent, sched, out),
                }
            }
            MacEvent::AckStart { from, to, attempt } => {
                let tx = self.channel.begin(now);
                let m = &mut self.stations[from as usize].meter;
                m.end_rx(now);
                m.begin_tx(now);
                sched.schedule_in(
                    self.params.ack_airtime(),
                    MacEvent::AckEnd {
                        from,
                        to,
                        tx,
                        attempt,
                    }
                    .into(),
                );
            }
            MacEvent::AckEnd {
                from,
                to,
                tx,
                attempt,
            } => {
                let corrupted = self.channel.end(tx, now);
                self.stations[from as usize].meter.end_tx(now);
                if corrupted {
                    return;
                }
                let matches = self.stations[to as usize]
                    .current
                    .as_ref()
                    .is_some_and(|c| c.awaiting_ack == Some(attempt));
                if matches {
                    let timer = self.stations[to as usize]
                        .current
                        .as_mut()
                        .unwrap()
                        .ack_timer
                        .take();
                    if let Some(h) = timer {
                        sched.cancel(h);
                    }
                    self.finish(to, MacStatus::Delivered, sched, out);
                }
            }
            MacEvent::AckTimeout { station, attempt } => {
                let max_retries = self.params.max_frame_retries;
                let min_be = self.params.min_be;
                let Some(cur) = self.stations[station as usize].current.as_mut() else {
                    return;
                };
                if cur.awaiting_ack != Some(attempt) {
                    return;
                }
                cur.awaiting_ack = None;
                cur.ack_timer = None;
                cur.retries += 1;
                if cur.retries > max_retries {
                    self.finish(station, MacStatus::RetryExhausted, sched, out);
                } else {
                    cur.nb = 0;
                    cur.be = min_be;
                    self.backoff(station, sched);
                }
            }
            MacEvent::JamEnd { tx } => {
                self.channel.end(tx, now);
            }
        }
    }
}
