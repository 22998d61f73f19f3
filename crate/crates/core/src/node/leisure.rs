use std::fmt;
use std::str::FromStr;

use crate::coap::ReplyDelayTail;
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LeisureDistribution {
    Uniform,
    TruncatedGeometric { p: f64 },
}

impl fmt::Display for LeisureDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LeisureDistribution::Uniform => f.write_str("uniform"),
            LeisureDistribution::TruncatedGeometric { .. } => f.write_str("geometric"),
        }
    }
}

/// Parses the distribution name; the geometric parameter is supplied separately.
impl FromStr for LeisureDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(LeisureDistribution::Uniform),
            "geometric" => Ok(LeisureDistribution::TruncatedGeometric { p: 0.5 }),
            other => Err(invalid(
                "leisure_distribution",
                format!("`{other}` is not one of uniform, geometric"),
            )),
        }
    }
}

/// Slot-aligned random delay a node waits before answering a multicast GET.
#[derive(Clone, Debug, PartialEq)]
pub struct LeisureConfig {
    pub distribution: LeisureDistribution,
    pub slot: SimTime,
    pub max_slots: u32,
    pub duty_cycle: f64,
}

fn geometric_mean_slots(p: f64, max_slots: u32) -> f64 {
    let q = 1.0 - p;
    let m1 = max_slots as f64 + 1.0;
    let q_m1 = (m1 * q.ln()).exp();
    q / p - m1 * q_m1 / (1.0 - q_m1)
}

impl LeisureConfig {
    /// No leisure: replies leave as soon as the request is decoded.
    pub fn none(slot: SimTime) -> Self {
        LeisureConfig {
            distribution: LeisureDistribution::Uniform,
            slot,
            max_slots: 0,
            duty_cycle: 0.0,
        }
    }

    /// Picks `max_slots` so the mean leisure is as close as possible to
    /// `duty_cycle * period`.
    pub fn for_duty_cycle(
        distribution: LeisureDistribution,
        slot: SimTime,
        duty_cycle: f64,
        period: SimTime,
    ) -> Result<Self> {
        if slot == SimTime::ZERO {
            return Err(invalid("leisure slot", "must be positive"));
        }
        if !(duty_cycle > 0.0 && duty_cycle <= 1.0) {
            return Err(invalid(
                "duty_cycle",
                format!("{duty_cycle} is outside (0, 1]"),
            ));
        }
        let target_slots = duty_cycle * period.ticks() as f64 / slot.ticks() as f64;
        let max_slots = match distribution {
            LeisureDistribution::Uniform => {
                let m = (2.0 * target_slots).round();
                if m > u32::MAX as f64 {
                    return Err(invalid("leisure", "mean leisure exceeds the slot range"));
                }
                m as u32
            }
            LeisureDistribution::TruncatedGeometric { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(invalid(
                        "leisure_geometric_p",
                        format!("{p} is outside (0, 1)"),
                    ));
                }
                let sup = (1.0 - p) / p;
                if target_slots >= sup {
                    return Err(invalid(
                        "leisure_geometric_p",
                        format!(
                            "mean leisure of {target_slots:.1} slots needs p below {:.3e}",
                            1.0 / (1.0 + target_slots)
                        ),
                    ));
                }
                // The truncated mean increases with max_slots.
                let (mut lo, mut hi) = (0u32, u32::MAX);
                while lo < hi {
                    let mid = lo + (hi - lo) / 2;
                    if geometric_mean_slots(p, mid) < target_slots {
                        lo = mid + 1;
                    } else {
                        hi = mid;
                    }
                }
                if lo > 0
                    && (target_slots - geometric_mean_slots(p, lo - 1)).abs()
                        < (geometric_mean_slots(p, lo) - target_slots).abs()
                {
                    lo - 1
                } else {
                    lo
                }
            }
        };
        Ok(LeisureConfig {
            distribution,
            slot,
            max_slots,
            duty_cycle,
        })
    }

    pub fn sample(&self, rng: &mut RngStream) -> SimTime {
        let slots = match self.distribution {
            LeisureDistribution::Uniform => rng.sample_uniform_slots(self.max_slots),
            LeisureDistribution::TruncatedGeometric { p } => rng
                .sample_truncated_geometric(p, self.max_slots)
                .expect("p validated at construction"),
        };
        self.slot * slots as u64
    }

    pub fn max(&self) -> SimTime {
        self.slot * self.max_slots as u64
    }

    pub fn mean(&self) -> SimTime {
        let slots = match self.distribution {
            _ if self.max_slots == 0 => 0.0,
            LeisureDistribution::Uniform => self.max_slots as f64 / 2.0,
            LeisureDistribution::TruncatedGeometric { p } => {
                geometric_mean_slots(p, self.max_slots)
            }
        };
        SimTime::from_secs_f64(slots * self.slot.as_secs_f64())
    }
}

impl ReplyDelayTail for LeisureConfig {
    fn tail(&self, x: SimTime) -> f64 {
        let j = x.ticks() / self.slot.ticks();
        let m = self.max_slots as u64;
        if j >= m {
            return 0.0;
        }
        match self.distribution {
            LeisureDistribution::Uniform => (m - j) as f64 / (m + 1) as f64,
            LeisureDistribution::TruncatedGeometric { p } => {
                let ln_q = (1.0 - p).ln();
                let q_j1 = ((j + 1) as f64 * ln_q).exp();
                let q_m1 = ((m + 1) as f64 * ln_q).exp();
                (q_j1 - q_m1) / (1.0 - q_m1)
            }
        }
    }

    fn support_max(&self) -> Option<SimTime> {
        Some(self.max())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamId;

    const SLOT: SimTime = SimTime::from_micros(320);

    #[test]
    fn uniform_fit_hits_target_mean() {
        let l = LeisureConfig::for_duty_cycle(
            LeisureDistribution::Uniform,
            SLOT,
            0.5,
            SimTime::from_secs(60),
        )
        .unwrap();
        assert_eq!(l.max_slots, 187_500);
        assert_eq!(l.mean(), SimTime::from_secs(30));
        assert_eq!(l.max(), SimTime::from_secs(60));
    }

    #[test]
    fn geometric_fit_is_close() {
        let geo = LeisureDistribution::TruncatedGeometric { p: 0.01 };
        // Target 50 slots against an untruncated mean of 99.
        let l = LeisureConfig::for_duty_cycle(geo, SLOT, 0.5, SimTime::from_millis(32)).unwrap();
        let slots = l.mean().as_secs_f64() / SLOT.as_secs_f64();
        assert!((slots - 50.0).abs() < 1.0, "{slots}");
        assert!(LeisureConfig::for_duty_cycle(geo, SLOT, 0.5, SimTime::from_secs(60)).is_err());
    }

    #[test]
    fn sample_is_slot_aligned_and_bounded() {
        let l = LeisureConfig {
            distribution: LeisureDistribution::Uniform,
            slot: SLOT,
            max_slots: 100,
            duty_cycle: 0.5,
        };
        let mut r = RngStream::new(5, StreamId::NodeLeisure(0));
        let mut hi = SimTime::ZERO;
        for _ in 0..10_000 {
            let x = l.sample(&mut r);
            assert_eq!(x.ticks() % SLOT.ticks(), 0);
            assert!(x <= l.max());
            hi = hi.max(x);
        }
        // Replies spread over the whole 32 ms window.
        assert_eq!(hi, SimTime::from_micros(32_000));
    }

    #[test]
    fn zero_slots_means_no_delay() {
        let l = LeisureConfig::none(SLOT);
        let mut r = RngStream::new(5, StreamId::NodeLeisure(0));
        assert_eq!(l.sample(&mut r), SimTime::ZERO);
        assert_eq!(l.tail(SimTime::ZERO), 0.0);
    }

    #[test]
    fn tail_matches_empirical() {
        for dist in [
            LeisureDistribution::Uniform,
            LeisureDistribution::TruncatedGeometric { p: 0.05 },
        ] {
            let l = LeisureConfig {
                distribution: dist,
                slot: SLOT,
                max_slots: 40,
                duty_cycle: 0.5,
            };
            let mut r = RngStream::new(9, StreamId::NodeLeisure(1));
            let draws: Vec<SimTime> = (0..100_000).map(|_| l.sample(&mut r)).collect();
            for j in [0u64, 5, 20, 39] {
                let x = SLOT * j;
                let emp = draws.iter().filter(|d| **d > x).count() as f64 / draws.len() as f64;
                assert!(
                    (emp - l.tail(x)).abs() < 0.01,
                    "{dist} j={j}: {emp} vs {}",
                    l.tail(x)
                );
            }
            let mean = draws.iter().map(|d| d.as_secs_f64()).sum::<f64>() / draws.len() as f64;
            assert!((mean / l.mean().as_secs_f64() - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn invalid_duty_cycle() {
        for d in [0.0, 1.5, f64::NAN] {
            assert!(LeisureConfig::for_duty_cycle(
                LeisureDistribution::Uniform,
                SLOT,
                d,
                SimTime::from_secs(60)
            )
            .is_err());
        }
    }
}
