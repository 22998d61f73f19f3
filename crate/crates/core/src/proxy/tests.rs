use super::*;

const SLOT: SimTime = SimTime::from_micros(320);

fn s(x: u64) -> SimTime {
    SimTime::from_secs(x)
}

fn proxy(scheme: Scheme, n: u32) -> (Proxy, Metrics) {
    let cfg = ProxyConfig::new(scheme, n);
    let p = Proxy::new(
        cfg,
        &TransmissionParams::default(),
        &LeisureConfig::none(SLOT),
    )
    .unwrap();
    (p, Metrics::new(n, s(60), SimTime::ZERO))
}

fn data(code: Code, mtype: MessageType, token: Token, resource: u32, version: u64) -> Packet {
    Packet::new(CoapMessage::new(mtype, code, 7, token), resource).with_version(version)
}

fn fill(p: &mut Proxy, m: &mut Metrics, now: SimTime) {
    for i in 0..p.config().n_nodes {
        let pkt = data(Code::Post, MessageType::Non, Token::from_u32(0), i, 1);
        p.on_uplink(Endpoint::Node(i), &pkt, now, m);
    }
}

#[test]
fn duty_cycle_examples() {
    let d = |n| configure_leisure(n, 0.001, LeisureDistribution::Uniform, SLOT, s(60));
    assert_eq!(d(500).unwrap().duty_cycle, 0.5);
    assert_eq!(d(2000).unwrap().duty_cycle, 1.0);
    assert!(d(0).is_err());
}

#[test]
fn no_stale_records_no_requests() {
    for scheme in Scheme::ALL {
        let (mut p, mut m) = proxy(scheme, 10);
        fill(&mut p, &mut m, s(100));
        assert!(p.check_freshness(s(130), &mut m).is_empty(), "{scheme}");
    }
}

#[test]
fn post_get_validates_each_stale_record_once() {
    let (mut p, mut m) = proxy(Scheme::PostGet, 5);
    fill(&mut p, &mut m, s(100));
    for i in 0..3 {
        let pkt = data(Code::Post, MessageType::Non, Token::from_u32(0), i, 2);
        p.on_uplink(Endpoint::Node(i), &pkt, s(150), &mut m);
    }
    // Records 3 and 4 were last refreshed at 100 s, 0..3 at 150 s.
    let out = p.check_freshness(s(201), &mut m);
    assert_eq!(out.len(), 2);
    // 0, 1, 2 go stale at 210 s; 3 and 4 timed out at 206 s and are retried.
    let out = p.check_freshness(s(211), &mut m);
    assert_eq!(out.len(), 5);
    assert!(out
        .iter()
        .all(|o| o.packet.msg.code == Code::Get && o.packet.msg.options.observe.is_none()));
    assert!(p.check_freshness(s(212), &mut m).is_empty());
    assert_eq!(p.check_freshness(s(216), &mut m).len(), 5);
    assert_eq!(m.coap().refresh_timeouts, 7);
}

#[test]
fn observe_reregisters_stale_records() {
    let (mut p, mut m) = proxy(Scheme::ObserveGet, 4);
    let reg = p.bootstrap(SimTime::ZERO);
    assert_eq!(reg.len(), 4);
    assert!(reg.iter().all(|o| o.packet.msg.options.observe == Some(0)));
    // The bootstrap requests are pending; nothing new until they expire.
    assert!(p.check_freshness(s(1), &mut m).is_empty());
    assert_eq!(p.check_freshness(s(5), &mut m).len(), 4);
}

#[test]
fn notification_on_new_registration_is_not_a_round_trip() {
    let (mut p, mut m) = proxy(Scheme::ObserveGet, 1);
    let tok = p.bootstrap(SimTime::ZERO)[0].packet.msg.token;
    let mut note = data(Code::Content, MessageType::Non, tok, 0, 2);
    note.msg = note.msg.with_observe(3);
    note.notification = true;
    p.on_uplink(Endpoint::Node(0), &note, s(3), &mut m);
    assert_eq!(p.outstanding_probes(), 0);
    assert_eq!(p.records()[0].estimator.rtt_p(), None);
    assert!(m.rtt.is_empty());
    assert!(p.records()[0].age(s(3)).is_some());
}

#[test]
fn mget_one_stale_of_many_triggers_one_broadcast() {
    let (mut p, mut m) = proxy(Scheme::Mget, 500);
    fill(&mut p, &mut m, s(100));
    p.records[0].last_update_at = None;
    let out = p.check_freshness(s(101), &mut m);
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].dst, Dest::Broadcast);
    assert!(p.records().iter().all(|r| r.pending.is_some()));
    // Node 0 never answers. Its record is due again once the pending
    // refresh expires, but the minimum gap holds back a second MGET.
    assert!(p.check_freshness(s(107), &mut m).is_empty());
    assert!(p.check_freshness(s(160), &mut m).is_empty());
    assert_eq!(p.check_freshness(s(161), &mut m).len(), 1);
    assert_eq!(m.coap().mgets, 2);
}

#[test]
fn mget_reply_matching_and_release() {
    let cfg = ProxyConfig {
        mget_min_gap: s(10),
        ..ProxyConfig::new(Scheme::Mget, 2)
    };
    let (mut p, mut m) = (
        Proxy::new(
            cfg,
            &TransmissionParams::default(),
            &LeisureConfig::none(SLOT),
        )
        .unwrap(),
        Metrics::new(2, s(60), SimTime::ZERO),
    );
    assert_eq!(p.release_after(), 1);
    let first = p.check_freshness(s(0), &mut m)[0].packet.msg.token;
    let reply = |tok, res| data(Code::Content, MessageType::Non, tok, res, 3);
    p.on_uplink(Endpoint::Node(0), &reply(first, 0), s(1), &mut m);
    assert_eq!(m.coap().mget_replies, 1);
    assert_eq!(p.records()[0].version, Some(3));
    // Record 1 never answered; its pending expires and the next MGET
    // releases the first token.
    let second = p.check_freshness(s(10), &mut m)[0].packet.msg.token;
    assert_ne!(first, second);
    p.on_uplink(Endpoint::Node(1), &reply(first, 1), s(11), &mut m);
    assert_eq!(m.coap().unmatched_tokens, 1);
    assert_eq!(p.records()[1].version, None);
}

#[test]
fn rtt_measured_at_application_and_unmatched_probe_ignored() {
    let (mut p, mut m) = proxy(Scheme::PostGet, 1);
    let out = p.check_freshness(s(10), &mut m);
    let tok = out[0].packet.msg.token;
    let reply = data(
        Code::Content,
        MessageType::Non,
        Token::from_u32(999_999),
        0,
        1,
    );
    p.on_uplink(
        Endpoint::Node(0),
        &reply,
        s(10) + SimTime::from_millis(30),
        &mut m,
    );
    assert_eq!(p.records()[0].estimator.rtt_p(), None);
    assert_eq!(m.coap().late_replies, 1);
    let reply = data(Code::Content, MessageType::Non, tok, 0, 1);
    p.on_uplink(
        Endpoint::Node(0),
        &reply,
        s(10) + SimTime::from_millis(40),
        &mut m,
    );
    assert_eq!(
        p.records()[0].estimator.rtt_p(),
        Some(SimTime::from_millis(40))
    );
    assert_eq!(p.outstanding_probes(), 0);
}

#[test]
fn post_answered_with_created() {
    let (mut p, mut m) = proxy(Scheme::PostGet, 1);
    let non = data(Code::Post, MessageType::Non, Token::from_u32(5), 0, 1);
    let out = p.on_uplink(Endpoint::Node(0), &non, s(1), &mut m);
    assert_eq!(out[0].packet.msg.code, Code::Created);
    assert_eq!(out[0].packet.msg.mtype, MessageType::Non);
    assert_eq!(out[0].packet.msg.token, Token::from_u32(5));
    let con = data(Code::Post, MessageType::Con, Token::from_u32(6), 0, 2);
    let out = p.on_uplink(Endpoint::Node(0), &con, s(2), &mut m);
    assert_eq!(out[0].packet.msg.mtype, MessageType::Ack);
    assert_eq!(out[0].packet.msg.message_id, 7);
    assert_eq!(out[0].dst, Dest::Unicast(Endpoint::Node(0)));
}

#[test]
fn refresh_disabled_sends_nothing() {
    for scheme in Scheme::ALL {
        let cfg = ProxyConfig {
            refresh: false,
            ..ProxyConfig::new(scheme, 3)
        };
        let mut p = Proxy::new(
            cfg,
            &TransmissionParams::default(),
            &LeisureConfig::none(SLOT),
        )
        .unwrap();
        let mut m = Metrics::new(3, s(60), SimTime::ZERO);
        assert!(p.check_freshness(s(1000), &mut m).is_empty());
    }
}

#[test]
fn congestion_control_raises_t_on_timeouts() {
    let cfg = ProxyConfig {
        congestion: Some(TAdjust {
            high: 0.1,
            ..TAdjust::default()
        }),
        ..ProxyConfig::new(Scheme::PostGet, 3)
    };
    let mut p = Proxy::new(
        cfg,
        &TransmissionParams::default(),
        &LeisureConfig::none(SLOT),
    )
    .unwrap();
    let mut m = Metrics::new(3, s(60), SimTime::ZERO);
    p.check_freshness(s(0), &mut m);
    p.check_freshness(s(5), &mut m);
    p.check_freshness(s(6), &mut m);
    assert!(p.t() >= 1.0);
}

#[test]
fn invalid_k_rejected() {
    let cfg = ProxyConfig {
        k: 4,
        ..ProxyConfig::new(Scheme::Mget, 3)
    };
    assert!(Proxy::new(
        cfg,
        &TransmissionParams::default(),
        &LeisureConfig::none(SLOT)
    )
    .is_err());
}
