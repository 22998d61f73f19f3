use crate::time::SimTime;

/// Gains and deviation multiplier of the freshness estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorParams {
    pub alpha: f64,
    pub beta: f64,
    pub t: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            alpha: 1.0 / 8.0,
            beta: 1.0 / 4.0,
            t: 0.0,
        }
    }
}

/// EWMA mean and mean deviation of the inter-arrival time of fresh data for
/// one resource, with the proxy-side round-trip estimate used to strip
/// delay jitter from each sample.
#[derive(Clone, Debug, PartialEq)]
pub struct FreshnessEstimator {
    params: EstimatorParams,
    mean: Option<f64>,
    dev: f64,
    rtt_p: Option<f64>,
    half_rtt_at_last_arrival: f64,
    samples: u64,
}

impl FreshnessEstimator {
    pub fn new(params: EstimatorParams) -> Self {
        FreshnessEstimator {
            params,
            mean: None,
            dev: 0.0,
            rtt_p: None,
            half_rtt_at_last_arrival: 0.0,
            samples: 0,
        }
    }

    /// Estimator already holding `mean` and `dev`.
    pub fn with_state(params: EstimatorParams, mean: SimTime, dev: SimTime) -> Self {
        FreshnessEstimator {
            mean: Some(mean.as_secs_f64()),
            dev: dev.as_secs_f64(),
            samples: 1,
            ..Self::new(params)
        }
    }

    pub fn t(&self) -> f64 {
        self.params.t
    }

    pub fn set_t(&mut self, t: f64) {
        self.params.t = t.max(0.0);
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn mean(&self) -> Option<SimTime> {
        self.mean.map(SimTime::from_secs_f64)
    }

    pub fn dev(&self) -> SimTime {
        SimTime::from_secs_f64(self.dev)
    }

    pub fn rtt_p(&self) -> Option<SimTime> {
        self.rtt_p.map(SimTime::from_secs_f64)
    }

    /// Folds in one proxy-measured round trip (gain 1/8; the first sample
    /// initialises the estimate).
    pub fn measure_rtt_p(&mut self, sample: SimTime) {
        let s = sample.as_secs_f64();
        self.rtt_p = Some(match self.rtt_p {
            None => s,
            Some(r) => r + (s - r) / 8.0,
        });
    }

    /// Registers a data arrival. `gap` is the raw time since the previous
    /// arrival, `None` for the first one. Returns the jitter-corrected sample
    /// that was fed to the averages.
    pub fn on_arrival(&mut self, gap: Option<SimTime>) -> Option<f64> {
        let half = self.rtt_p.unwrap_or(0.0) / 2.0;
        let correction = half - self.half_rtt_at_last_arrival;
        self.half_rtt_at_last_arrival = half;
        let raw = gap?.as_secs_f64();
        let s = (raw - correction).max(0.0);
        self.add_sample(s);
        Some(s)
    }

    fn add_sample(&mut self, s: f64) {
        let EstimatorParams { alpha, beta, .. } = self.params;
        match self.mean {
            None => {
                self.mean = Some(s);
                self.dev = s / 2.0;
            }
            Some(m) => {
                self.dev = (1.0 - beta) * self.dev + beta * (s - m).abs();
                self.mean = Some((1.0 - alpha) * m + alpha * s);
            }
        }
        self.samples += 1;
    }

    /// `mean + t * dev`, once at least one sample exists.
    pub fn max_age(&self) -> Option<SimTime> {
        self.mean
            .map(|m| SimTime::from_secs_f64(m + self.params.t * self.dev))
    }
}

/// Water marks for adapting `t` to a congestion signal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TAdjust {
    pub high: f64,
    pub low: f64,
    pub t_max: f64,
    pub step: f64,
}

impl Default for TAdjust {
    fn default() -> Self {
        TAdjust {
            high: 0.2,
            low: 0.05,
            t_max: 4.0,
            step: 1.0,
        }
    }
}

pub fn adjust_t(t: f64, signal: f64, cfg: &TAdjust) -> f64 {
    if signal > cfg.high {
        (t + cfg.step).min(cfg.t_max)
    } else if signal < cfg.low {
        (t - cfg.step).max(0.0)
    } else {
        t
    }
}
