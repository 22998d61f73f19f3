use crate::coap::TransmissionParams;
use crate::engine::Scheduler;
use crate::error::Result;
use crate::mac::{Dest, Endpoint, EnergyRates, Mac, MacEvent, MacFrame, MacIndication};
use crate::metrics::{Metrics, MetricsSnapshot};
use crate::node::{LeisureConfig, Node, NodeAction, NodeConfig, NodeTimer};
use crate::proxy::{
    configure_leisure, Direction, EstimatorParams, Outgoing, Pipeline, Proxy, ProxyConfig,
    StageStep, TAdjust,
};
use crate::time::SimTime;
use crate::types::{Packet, Scheme};

use super::config::ScenarioConfig;

#[derive(Clone, Debug)]
enum Event {
    Mac(MacEvent),
    Node { node: u32, timer: NodeTimer },
    LeisureDone { node: u32, packet: Packet },
    Stage { dir: Direction, stage: usize },
    Check,
    Bootstrap,
    Warmup,
}

impl From<MacEvent> for Event {
    fn from(e: MacEvent) -> Self {
        Event::Mac(e)
    }
}

struct World {
    scheme: Scheme,
    seed: u64,
    check_interval: SimTime,
    mac: Mac<Packet>,
    nodes: Vec<Node>,
    proxy: Proxy,
    uplink: Pipeline<(Endpoint, Packet)>,
    downlink: Pipeline<Outgoing>,
    metrics: Metrics,
    indications: Vec<MacIndication<Packet>>,
}

impl World {
    fn build(cfg: &ScenarioConfig) -> Result<World> {
        cfg.validate()?;
        let n = cfg.n_nodes;
        let coap = TransmissionParams::default();
        let slot = cfg.mac.backoff_unit;
        let leisure = if cfg.scheme == Scheme::Mget {
            configure_leisure(
                n,
                cfg.duty_cycle_coefficient,
                cfg.leisure_distribution,
                slot,
                cfg.mget_min_gap(),
            )?
        } else {
            LeisureConfig::none(slot)
        };
        let node_cfg = NodeConfig {
            scheme: cfg.scheme,
            mean_lifetime: SimTime::from_secs_f64(cfg.mean_lifetime_s),
            frames: cfg.frames,
            con_fraction: cfg.con_fraction,
            gate_enabled: cfg.node_gate,
            coap: coap.clone(),
        };
        let nodes = (0..n)
            .map(|i| {
                let mut node = Node::new(i, node_cfg.clone(), cfg.seed, slot, SimTime::ZERO)?;
                node.set_leisure(leisure.clone());
                Ok(node)
            })
            .collect::<Result<Vec<_>>>()?;
        let threshold = SimTime::from_secs_f64(cfg.freshness_threshold_s);
        let proxy_cfg = ProxyConfig {
            freshness_threshold: threshold,
            k: cfg.k,
            check_interval: SimTime::from_secs_f64(cfg.check_interval_s),
            refresh: cfg.refresh,
            validation_gets: cfg.validation_gets,
            refresh_timeout: SimTime::from_secs_f64(cfg.refresh_timeout_s),
            mget_min_gap: cfg.mget_min_gap(),
            epsilon_token: cfg.epsilon_token,
            estimator: EstimatorParams {
                t: cfg.t,
                ..EstimatorParams::default()
            },
            congestion: cfg.proxy_gate.then(TAdjust::default),
            frames: cfg.frames,
            ..ProxyConfig::new(cfg.scheme, n)
        };
        let proxy = Proxy::new(proxy_cfg, &coap, &leisure)?;
        let service = SimTime::from_secs_f64(cfg.stage_service_ms / 1e3);
        Ok(World {
            scheme: cfg.scheme,
            seed: cfg.seed,
            check_interval: proxy.config().check_interval,
            mac: Mac::new(n, cfg.mac.clone(), EnergyRates::default(), cfg.seed)?,
            nodes,
            proxy,
            uplink: Pipeline::new(Direction::Uplink, cfg.proxy_stages, service, cfg.seed)?,
            downlink: Pipeline::new(Direction::Downlink, cfg.proxy_stages, service, cfg.seed)?,
            metrics: Metrics::new(n, threshold, cfg.warmup()),
            indications: Vec::new(),
        })
    }

    fn total_node_energy(&self, at: SimTime) -> f64 {
        (0..self.nodes.len() as u32)
            .map(|i| self.mac.energy_report(Endpoint::Node(i), at))
            .sum()
    }

    fn gate_drops(&self) -> u64 {
        self.nodes.iter().map(|n| n.stats().gate_drops).sum()
    }

    fn submit(&mut self, frame: MacFrame<Packet>, s: &mut Scheduler<Event>) {
        self.metrics.record_submit(s.now());
        self.mac.submit(frame, s).expect("frame sizes validated");
    }

    fn node_actions(&mut self, node: u32, actions: Vec<NodeAction>, s: &mut Scheduler<Event>) {
        for a in actions {
            match a {
                NodeAction::Transmit {
                    packet,
                    length_bytes,
                } => {
                    let f = MacFrame::unicast(
                        Endpoint::Node(node),
                        Endpoint::Proxy,
                        length_bytes,
                        packet,
                    );
                    self.submit(f, s);
                }
                NodeAction::Hold { packet, until } => {
                    s.schedule(until, Event::LeisureDone { node, packet })
                        .expect("leisure is never negative");
                }
                NodeAction::Timer { at, timer } => {
                    s.schedule(at, Event::Node { node, timer })
                        .expect("node timers lie in the future");
                }
            }
        }
    }

    fn stage_step<J>(&mut self, dir: Direction, step: &StageStep<J>, s: &mut Scheduler<Event>) {
        for &(stage, at) in &step.starts {
            s.schedule(at, Event::Stage { dir, stage })
                .expect("service ends after it starts");
        }
    }

    fn send_down(&mut self, out: Vec<Outgoing>, s: &mut Scheduler<Event>) {
        for o in out {
            let step = self.downlink.enter(o, s.now());
            self.stage_step(Direction::Downlink, &step, s);
            if let Some(o) = step.exit {
                self.transmit_down(o, s);
            }
        }
    }

    fn transmit_down(&mut self, o: Outgoing, s: &mut Scheduler<Event>) {
        let f = match o.dst {
            Dest::Broadcast => MacFrame::broadcast(Endpoint::Proxy, o.length_bytes, o.packet),
            Dest::Unicast(to) => MacFrame::unicast(Endpoint::Proxy, to, o.length_bytes, o.packet),
        };
        self.submit(f, s);
    }

    fn deliver_up(&mut self, src: Endpoint, packet: Packet, s: &mut Scheduler<Event>) {
        let out = self
            .proxy
            .on_uplink(src, &packet, s.now(), &mut self.metrics);
        self.send_down(out, s);
    }

    fn on_indications(&mut self, s: &mut Scheduler<Event>) {
        let inds = std::mem::take(&mut self.indications);
        for ind in inds {
            match ind {
                MacIndication::Completed {
                    station,
                    outcome,
                    submitted_at,
                    ..
                } => {
                    let from_node = station != Endpoint::Proxy;
                    self.metrics
                        .record_mac_attempt(submitted_at, from_node, &outcome);
                }
                MacIndication::Received { src, dst, payload } => match dst {
                    Dest::Unicast(Endpoint::Proxy) => {
                        let step = self.uplink.enter((src, payload), s.now());
                        self.stage_step(Direction::Uplink, &step, s);
                        if let Some((src, p)) = step.exit {
                            self.deliver_up(src, p, s);
                        }
                    }
                    Dest::Unicast(Endpoint::Node(i)) => {
                        let a = self.nodes[i as usize].on_receive(src, dst, &payload, s.now());
                        self.node_actions(i, a, s);
                    }
                    Dest::Broadcast => {
                        for i in 0..self.nodes.len() as u32 {
                            let a = self.nodes[i as usize].on_receive(src, dst, &payload, s.now());
                            self.node_actions(i, a, s);
                        }
                    }
                },
            }
        }
    }

    fn handle(&mut self, ev: Event, s: &mut Scheduler<Event>) {
        let now = s.now();
        match ev {
            Event::Mac(e) => {
                let mut inds = std::mem::take(&mut self.indications);
                self.mac.handle(e, s, &mut inds);
                self.indications = inds;
                self.on_indications(s);
            }
            Event::Node { node, timer } => {
                if timer == NodeTimer::VariableChange {
                    self.metrics.record_generation(node, now);
                }
                let a = self.nodes[node as usize].on_timer(timer, now);
                self.node_actions(node, a, s);
            }
            Event::LeisureDone { node, packet } => {
                let a = self.nodes[node as usize].on_leisure_done(packet, now);
                self.node_actions(node, a, s);
            }
            Event::Stage { dir, stage } => match dir {
                Direction::Uplink => {
                    let step = self.uplink.complete(stage, now);
                    self.stage_step(dir, &step, s);
                    if let Some((src, p)) = step.exit {
                        self.deliver_up(src, p, s);
                    }
                }
                Direction::Downlink => {
                    let step = self.downlink.complete(stage, now);
                    self.stage_step(dir, &step, s);
                    if let Some(o) = step.exit {
                        self.transmit_down(o, s);
                    }
                }
            },
            Event::Check => {
                let out = self.proxy.check_freshness(now, &mut self.metrics);
                self.send_down(out, s);
                s.schedule_in(self.check_interval, Event::Check);
            }
            Event::Bootstrap => {
                let out = self.proxy.bootstrap(now);
                self.send_down(out, s);
            }
            Event::Warmup => {
                let e = self.total_node_energy(now);
                let g = self.gate_drops();
                self.metrics.mark_warmup(e, g);
            }
        }
    }
}

/// Builds the domain described by `cfg`, runs it and returns its metrics.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsSnapshot> {
    let mut w = World::build(cfg)?;
    let end = cfg.duration();
    let mut s: Scheduler<Event> = Scheduler::new();
    s.schedule(cfg.warmup(), Event::Warmup)?;
    s.schedule(SimTime::ZERO, Event::Bootstrap)?;
    s.schedule(w.check_interval, Event::Check)?;
    for i in 0..w.nodes.len() as u32 {
        let a = vec![w.nodes[i as usize].start()];
        w.node_actions(i, a, &mut s);
    }
    s.run_until(end, |s, ev| w.handle(ev, s));
    let warmup = w.metrics.warmup();
    let in_flight = w
        .mac
        .in_flight_submissions()
        .filter(|t| *t >= warmup)
        .count() as u64;
    w.metrics.finalize(
        w.scheme,
        w.seed,
        end,
        w.total_node_energy(end),
        w.gate_drops(),
        in_flight,
    )
}
