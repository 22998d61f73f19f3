//! Seeded, stream-separated random sampling.
//!
//! Every stream is a ChaCha8 generator keyed by the run's master seed with the
//! ChaCha stream (nonce) set to the stream id, so streams are independent and
//! adding a component never shifts another component's draws.
//!
//! Continuous uniforms are `u = (x >> 11) * 2^-53` for a raw 64-bit word `x`,
//! giving `u` in `[0, 1)` with 53 bits of precision. Exponential draws use the
//! inverse transform `-mean * ln(1 - u)` and are rounded to the nearest tick.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::time::SimTime;

/// Well-known stream ids. Node streams are namespaced by node index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamId {
    NodeMac(u32),
    NodeVariable(u32),
    NodeLeisure(u32),
    NodeCoap(u32),
    ProxyMac,
    ProxyStage { uplink: bool, stage: u8 },
    Proxy,
    Custom(u64),
}

impl StreamId {
    pub fn as_u64(self) -> u64 {
        const NODE_BASE: u64 = 1 << 32;
        match self {
            StreamId::Custom(x) => x & 0xffff_ffff,
            StreamId::ProxyMac => 0x1_0000,
            StreamId::Proxy => 0x1_0001,
            StreamId::ProxyStage { uplink, stage } => {
                0x1_0100 + ((uplink as u64) << 4) + stage as u64
            }
            StreamId::NodeMac(i) => NODE_BASE + ((i as u64) << 4),
            StreamId::NodeVariable(i) => NODE_BASE + ((i as u64) << 4) + 1,
            StreamId::NodeLeisure(i) => NODE_BASE + ((i as u64) << 4) + 2,
            StreamId::NodeCoap(i) => NODE_BASE + ((i as u64) << 4) + 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RngStream {
    id: u64,
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream: StreamId) -> Self {
        let id = stream.as_u64();
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(id);
        RngStream {
            id,
            seed: master_seed,
            rng,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer on `{0, ..., max}` without modulo bias.
    pub fn uniform_inclusive(&mut self, max: u64) -> u64 {
        if max == u64::MAX {
            return self.next_u64();
        }
        let range = max + 1;
        let zone = u64::MAX - (u64::MAX % range) - 1;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % range;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Exponential draw with the given mean, rounded to the nearest tick.
    pub fn sample_exponential(&mut self, mean: SimTime) -> Result<SimTime> {
        if mean == SimTime::ZERO {
            return Err(invalid("mean", "exponential mean must be positive"));
        }
        let u = self.uniform();
        let x = -(mean.ticks() as f64) * (1.0 - u).ln();
        Ok(SimTime::from_ticks(x.round() as u64))
    }

    /// Uniform slot count on `{0, 1, ..., max_slots}`; `max_slots = 0` yields 0.
    pub fn sample_uniform_slots(&mut self, max_slots: u32) -> u32 {
        if max_slots == 0 {
            return 0;
        }
        self.uniform_inclusive(max_slots as u64) as u32
    }

    /// Geometric(p) on `{0, 1, ...}` (P(k) ∝ p(1-p)^k) conditioned on
    /// `k <= max_slots`, sampled by inverting the truncated CDF.
    pub fn sample_truncated_geometric(&mut self, p: f64, max_slots: u32) -> Result<u32> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid("p", format!("{p} is outside (0, 1)")));
        }
        if max_slots == 0 {
            return Ok(0);
        }
        let q = 1.0 - p;
        let ln_q = q.ln();
        // 1 - q^(M+1), computed without cancellation for small p.
        let mass = -((max_slots as f64 + 1.0) * ln_q).exp_m1();
        let u = self.uniform();
        // CDF(k) = (1 - q^(k+1)) / mass; smallest k with CDF(k) > u.
        let target = (-(u * mass)).ln_1p();
        let k = (target / ln_q).floor();
        let k = if k.is_finite() && k > 0.0 {
            k as u64
        } else {
            0
        };
        Ok(k.min(max_slots as u64) as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_of<F: FnMut() -> f64>(n: usize, mut f: F) -> f64 {
        (0..n).map(|_| f()).sum::<f64>() / n as f64
    }

    #[test]
    fn exponential_mean_sixty_seconds() {
        let mut r = RngStream::new(1, StreamId::Custom(7));
        let m = mean_of(100_000, || {
            r.sample_exponential(SimTime::from_secs(60))
                .unwrap()
                .as_secs_f64()
        });
        assert!((59.4..=60.6).contains(&m), "mean {m}");
    }

    #[test]
    fn exponential_mean_five_millis() {
        let mut r = RngStream::new(2, StreamId::Custom(7));
        let m = mean_of(100_000, || {
            r.sample_exponential(SimTime::from_millis(5))
                .unwrap()
                .as_secs_f64()
        });
        assert!((4.95e-3..=5.05e-3).contains(&m), "mean {m}");
    }

    #[test]
    fn exponential_zero_mean_is_error() {
        let mut r = RngStream::new(0, StreamId::Custom(0));
        assert!(r.sample_exponential(SimTime::ZERO).is_err());
    }

    #[test]
    fn uniform_slots_bounds_and_mean() {
        let mut r = RngStream::new(3, StreamId::Custom(1));
        for _ in 0..1000 {
            assert!(r.sample_uniform_slots(1) <= 1);
        }
        assert_eq!(r.sample_uniform_slots(0), 0);
        let m = mean_of(100_000, || r.sample_uniform_slots(100) as f64);
        assert!((49.0..=51.0).contains(&m), "mean {m}");
    }

    #[test]
    fn truncated_geometric_two_atoms() {
        // p = 0.5 on {0, 1}: weights 0.5 and 0.25, normalised to 2/3 and 1/3.
        let mut r = RngStream::new(4, StreamId::Custom(1));
        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| r.sample_truncated_geometric(0.5, 1).unwrap() == 0)
            .count();
        let p0 = zeros as f64 / n as f64;
        assert!((p0 - 2.0 / 3.0).abs() <= 0.02 * 2.0 / 3.0, "p0 {p0}");
    }

    #[test]
    fn truncated_geometric_matches_pmf() {
        // Oracle: normalised p(1-p)^k over {0..=M}, compared with histogram.
        let (p, m) = (0.2f64, 6u32);
        let w: Vec<f64> = (0..=m).map(|k| p * (1.0 - p).powi(k as i32)).collect();
        let total: f64 = w.iter().sum();
        let mut r = RngStream::new(5, StreamId::Custom(1));
        let n = 200_000;
        let mut hist = vec![0usize; m as usize + 1];
        for _ in 0..n {
            hist[r.sample_truncated_geometric(p, m).unwrap() as usize] += 1;
        }
        for k in 0..=m as usize {
            let emp = hist[k] as f64 / n as f64;
            assert!((emp - w[k] / total).abs() < 0.005, "k={k} emp={emp}");
        }
    }

    #[test]
    fn truncated_geometric_near_one_is_mostly_zero() {
        let mut r = RngStream::new(6, StreamId::Custom(1));
        let zeros = (0..10_000)
            .filter(|_| r.sample_truncated_geometric(0.999, 50).unwrap() == 0)
            .count();
        assert!(zeros >= 9_950);
    }

    #[test]
    fn truncated_geometric_rejects_bad_p() {
        let mut r = RngStream::new(0, StreamId::Custom(1));
        assert!(r.sample_truncated_geometric(1.5, 3).is_err());
        assert!(r.sample_truncated_geometric(0.0, 3).is_err());
    }

    #[test]
    fn streams_are_independent_of_each_other() {
        let mut a1 = RngStream::new(9, StreamId::NodeMac(0));
        let mut b = RngStream::new(9, StreamId::NodeMac(1));
        let mut a2 = RngStream::new(9, StreamId::NodeMac(0));
        let xs: Vec<u64> = (0..8).map(|_| a1.next_u64()).collect();
        // Drawing from another stream in between must not perturb stream 0.
        let ys: Vec<u64> = (0..8)
            .map(|_| {
                b.next_u64();
                a2.next_u64()
            })
            .collect();
        assert_eq!(xs, ys);
        assert_ne!(xs[0], RngStream::new(9, StreamId::NodeMac(1)).next_u64());
    }

    #[test]
    fn stream_ids_do_not_collide() {
        use std::collections::HashSet;
        let mut seen = HashSet::new();
        for i in 0..2000 {
            for s in [
                StreamId::NodeMac(i),
                StreamId::NodeVariable(i),
                StreamId::NodeLeisure(i),
                StreamId::NodeCoap(i),
            ] {
                assert!(seen.insert(s.as_u64()));
            }
        }
        for s in [StreamId::ProxyMac, StreamId::Proxy] {
            assert!(seen.insert(s.as_u64()));
        }
        for stage in 0..8 {
            for uplink in [false, true] {
                assert!(seen.insert(StreamId::ProxyStage { uplink, stage }.as_u64()));
            }
        }
    }
}
