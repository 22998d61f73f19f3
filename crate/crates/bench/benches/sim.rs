use std::hint::black_box;

use coapsim::coap::{decode, encode_header, CoapMessage, Code, ETag, MessageType, Token};
use coapsim::engine::Scheduler;
use coapsim::{run_scenario, ScenarioConfig, Scheme, SimTime};
use criterion::{criterion_group, criterion_main, Criterion};

fn scheduler(c: &mut Criterion) {
    c.bench_function("scheduler_100k_events", |b| {
        b.iter(|| {
            let mut s: Scheduler<u32> = Scheduler::new();
            for i in 0..1000u64 {
                s.schedule(SimTime::from_micros(i * 37 % 1000), i as u32)
                    .unwrap();
            }
            let mut left = 100_000u32;
            s.run_until(SimTime::from_secs(1_000_000), |s, e| {
                if left > 0 {
                    left -= 1;
                    s.schedule_in(
                        SimTime::from_micros(u64::from(e % 500) + 1),
                        e.wrapping_add(1),
                    );
                }
            })
        })
    });
}

fn codec(c: &mut Criterion) {
    let msg = CoapMessage::new(MessageType::Con, Code::Content, 4242, Token::from_u32(77))
        .with_observe(12)
        .with_etag(ETag::from_u32(9))
        .with_payload_len(8);
    c.bench_function("codec_round_trip", |b| {
        b.iter(|| decode(&encode_header(black_box(&msg)).unwrap()).unwrap())
    });
}

fn scenarios(c: &mut Criterion) {
    let mut g = c.benchmark_group("scenario_600s_n100");
    g.sample_size(10);
    for scheme in Scheme::ALL {
        let cfg = ScenarioConfig {
            scheme,
            n_nodes: 100,
            sim_duration_s: 600.0,
            ..ScenarioConfig::default()
        };
        g.bench_function(scheme.as_str(), |b| {
            b.iter(|| run_scenario(black_box(&cfg)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, scheduler, codec, scenarios);
criterion_main!(benches);
