use crate::error::{invalid, Result};
use crate::rng::RngStream;
use crate::time::SimTime;

/// CoAP delay parameters with their default values.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionParams {
    pub ack_timeout: SimTime,
    pub ack_random_factor: f64,
    pub max_retransmit: u32,
    pub default_leisure: SimTime,
    pub max_transmit_span: SimTime,
    pub processing_delay: SimTime,
    pub max_rtt: SimTime,
}

impl Default for TransmissionParams {
    fn default() -> Self {
        TransmissionParams {
            ack_timeout: SimTime::from_secs(2),
            ack_random_factor: 1.5,
            max_retransmit: 4,
            default_leisure: SimTime::from_secs(5),
            max_transmit_span: SimTime::from_secs(45),
            processing_delay: SimTime::from_secs(2),
            max_rtt: SimTime::from_secs(202),
        }
    }
}

impl TransmissionParams {
    /// ack_timeout * ack_random_factor * (2^max_retransmit - 1).
    pub fn derived_transmit_span(&self) -> SimTime {
        let factor = self.ack_random_factor * ((1u64 << self.max_retransmit) - 1) as f64;
        SimTime::from_secs_f64(self.ack_timeout.as_secs_f64() * factor)
    }

    /// One-way latency bound implied by MAX_RTT = 2 * MAX_LATENCY + PROCESSING_DELAY.
    pub fn max_latency(&self) -> SimTime {
        SimTime::from_ticks(self.max_rtt.saturating_sub(self.processing_delay).ticks() / 2)
    }

    /// How long a confirmable message ID stays reserved.
    pub fn exchange_lifetime(&self) -> SimTime {
        self.max_transmit_span + self.max_rtt
    }

    /// How long a non-confirmable message ID stays reserved.
    pub fn non_lifetime(&self) -> SimTime {
        self.max_transmit_span + self.max_latency()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ack_timeout == SimTime::ZERO {
            return Err(invalid("ack_timeout", "must be positive"));
        }
        if self.ack_random_factor.is_nan() || self.ack_random_factor < 1.0 {
            return Err(invalid("ack_random_factor", "must be at least 1"));
        }
        if self.max_retransmit > 20 {
            return Err(invalid("max_retransmit", "must be at most 20"));
        }
        if self.derived_transmit_span() != self.max_transmit_span {
            return Err(invalid(
                "max_transmit_span",
                format!(
                    "{} is inconsistent with ack_timeout/factor/max_retransmit ({})",
                    self.max_transmit_span,
                    self.derived_transmit_span()
                ),
            ));
        }
        Ok(())
    }
}

/// Timeouts of one confirmable exchange.
#[derive(Clone, Debug, PartialEq)]
pub struct RetransmissionSchedule {
    /// Wait before each retransmission; the sum is the time of the last one.
    pub timeouts: Vec<SimTime>,
    /// Wait after the last transmission before the exchange is abandoned.
    pub final_wait: SimTime,
}

impl RetransmissionSchedule {
    /// Time from the first transmission to the last retransmission.
    pub fn span(&self) -> SimTime {
        self.timeouts.iter().fold(SimTime::ZERO, |a, b| a + *b)
    }

    pub fn give_up_after(&self) -> SimTime {
        self.span() + self.final_wait
    }
}

/// Schedule with the initial timeout fixed at `ack_timeout * factor`.
pub fn retransmission_schedule_with_factor(
    params: &TransmissionParams,
    factor: f64,
) -> RetransmissionSchedule {
    let initial = SimTime::from_secs_f64(params.ack_timeout.as_secs_f64() * factor);
    let timeouts = (0..params.max_retransmit)
        .map(|k| initial * (1u64 << k))
        .collect();
    RetransmissionSchedule {
        timeouts,
        final_wait: initial * (1u64 << params.max_retransmit),
    }
}

/// Initial timeout drawn uniformly from `[ack_timeout, ack_timeout * factor]`,
/// doubling on every retransmission.
pub fn retransmission_schedule(
    params: &TransmissionParams,
    rng: &mut RngStream,
) -> RetransmissionSchedule {
    let factor = 1.0 + rng.uniform() * (params.ack_random_factor - 1.0);
    retransmission_schedule_with_factor(params, factor)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RetxAction {
    Retransmit { next_deadline: SimTime },
    GiveUp,
}

/// Retransmission bookkeeping for one confirmable message.
#[derive(Clone, Debug, PartialEq)]
pub struct RetxState {
    pub attempts_made: u32,
    pub current_timeout: SimTime,
    pub give_up_at: SimTime,
    max_retransmit: u32,
}

impl RetxState {
    /// Starts tracking a message first sent at `sent_at`; returns the state and
    /// the first deadline.
    pub fn start(params: &TransmissionParams, rng: &mut RngStream, sent_at: SimTime) -> Self {
        let sched = retransmission_schedule(params, rng);
        let initial = sched.timeouts.first().copied().unwrap_or(sched.final_wait);
        RetxState {
            attempts_made: 0,
            current_timeout: initial,
            give_up_at: sent_at + sched.give_up_after(),
            max_retransmit: params.max_retransmit,
        }
    }

    pub fn deadline_after(&self, sent_at: SimTime) -> SimTime {
        sent_at + self.current_timeout
    }

    /// Called when the current timeout expires without an ACK.
    pub fn on_timeout(&mut self, now: SimTime) -> RetxAction {
        if self.attempts_made >= self.max_retransmit {
            return RetxAction::GiveUp;
        }
        self.attempts_made += 1;
        self.current_timeout = self.current_timeout * 2;
        RetxAction::Retransmit {
            next_deadline: now + self.current_timeout,
        }
    }
}
