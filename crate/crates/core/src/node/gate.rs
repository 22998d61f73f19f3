use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateDecision {
    Allow,
    Drop,
}

/// Node-side congestion control: no two data transmissions closer than the
/// node's own round-trip estimate.
#[derive(Clone, Debug, Default)]
pub struct NodeCongestionState {
    pub enabled: bool,
    pub last_tx_at: Option<SimTime>,
    pub rtt_s_estimate: Option<SimTime>,
}

impl NodeCongestionState {
    pub fn new(enabled: bool) -> Self {
        NodeCongestionState {
            enabled,
            ..Default::default()
        }
    }

    /// EWMA with gain 1/8, seeded by the first sample.
    pub fn record_rtt_sample(&mut self, sample: SimTime) {
        self.rtt_s_estimate = Some(match self.rtt_s_estimate {
            None => sample,
            Some(est) => SimTime::from_ticks((est.ticks() * 7 + sample.ticks() + 4) / 8),
        });
    }
}

pub fn congestion_gate(state: &mut NodeCongestionState, now: SimTime) -> GateDecision {
    if state.enabled {
        if let (Some(last), Some(rtt)) = (state.last_tx_at, state.rtt_s_estimate) {
            if now.saturating_sub(last) < rtt {
                return GateDecision::Drop;
            }
        }
    }
    state.last_tx_at = Some(now);
    GateDecision::Allow
}
