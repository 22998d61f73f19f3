use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RadioState {
    Inactive,
    Receiving,
    Transmitting,
}

impl RadioState {
    fn index(self) -> usize {
        match self {
            RadioState::Inactive => 0,
            RadioState::Receiving => 1,
            RadioState::Transmitting => 2,
        }
    }
}

/// Energy drawn by the radio per backoff period in each state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRates {
    pub unit: SimTime,
    pub inactive_j: f64,
    pub receiving_j: f64,
    pub transmitting_j: f64,
}

impl Default for EnergyRates {
    /// 18.2 nJ idle, 17.9 uJ receive, 15.8 uJ transmit at 0 dBm, per 320 us.
    fn default() -> Self {
        EnergyRates {
            unit: SimTime::from_micros(320),
            inactive_j: 18.2e-9,
            receiving_j: 17.9e-6,
            transmitting_j: 15.8e-6,
        }
    }
}

impl EnergyRates {
    pub fn per_unit(&self, state: RadioState) -> f64 {
        match state {
            RadioState::Inactive => self.inactive_j,
            RadioState::Receiving => self.receiving_j,
            RadioState::Transmitting => self.transmitting_j,
        }
    }

    /// Energy for `dt` spent in `state`, pro rata per backoff unit.
    pub fn energy(&self, state: RadioState, dt: SimTime) -> f64 {
        self.per_unit(state) * dt.ticks() as f64 / self.unit.ticks() as f64
    }
}

/// Per-radio energy accumulator.
///
/// The radio state is derived from reference counts: transmitting while any
/// transmit hold is active, otherwise receiving while any receive hold is
/// active, otherwise inactive. Time is accumulated per state as integer ticks,
/// so the total is exact and non-decreasing.
#[derive(Clone, Debug)]
pub struct EnergyMeter {
    rates: EnergyRates,
    since: SimTime,
    ticks: [u64; 3],
    tx_holds: u32,
    rx_holds: u32,
    log: Option<Vec<(SimTime, RadioState)>>,
}

impl EnergyMeter {
    pub fn new(rates: EnergyRates) -> Self {
        EnergyMeter {
            rates,
            since: SimTime::ZERO,
            ticks: [0; 3],
            tx_holds: 0,
            rx_holds: 0,
            log: None,
        }
    }

    /// Records every state transition, for replay checks.
    pub fn with_log(mut self) -> Self {
        self.log = Some(vec![(SimTime::ZERO, RadioState::Inactive)]);
        self
    }

    pub fn rates(&self) -> &EnergyRates {
        &self.rates
    }

    pub fn state(&self) -> RadioState {
        if self.tx_holds > 0 {
            RadioState::Transmitting
        } else if self.rx_holds > 0 {
            RadioState::Receiving
        } else {
            RadioState::Inactive
        }
    }

    pub fn transitions(&self) -> Option<&[(SimTime, RadioState)]> {
        self.log.as_deref()
    }

    fn settle(&mut self, now: SimTime) {
        debug_assert!(now >= self.since, "energy meter clock went backwards");
        let dt = now.saturating_sub(self.since);
        self.ticks[self.state().index()] += dt.ticks();
        if now > self.since {
            self.since = now;
        }
    }

    fn change<F: FnOnce(&mut Self)>(&mut self, now: SimTime, f: F) {
        self.settle(now);
        let before = self.state();
        f(self);
        let after = self.state();
        if before != after {
            if let Some(log) = self.log.as_mut() {
                log.push((now, after));
            }
        }
    }

    pub fn begin_rx(&mut self, now: SimTime) {
        self.change(now, |m| m.rx_holds += 1);
    }

    pub fn end_rx(&mut self, now: SimTime) {
        self.change(now, |m| {
            debug_assert!(m.rx_holds > 0);
            m.rx_holds = m.rx_holds.saturating_sub(1);
        });
    }

    pub fn begin_tx(&mut self, now: SimTime) {
        self.change(now, |m| m.tx_holds += 1);
    }

    pub fn end_tx(&mut self, now: SimTime) {
        self.change(now, |m| {
            debug_assert!(m.tx_holds > 0);
            m.tx_holds = m.tx_holds.saturating_sub(1);
        });
    }

    /// Time spent in `state` up to `at`, including the open interval.
    pub fn time_in(&self, state: RadioState, at: SimTime) -> SimTime {
        let mut t = self.ticks[state.index()];
        if self.state() == state {
            t += at.saturating_sub(self.since).ticks();
        }
        SimTime::from_ticks(t)
    }

    /// Joules consumed up to `at`, including the tail since the last change.
    pub fn energy_report(&self, at: SimTime) -> f64 {
        [
            RadioState::Inactive,
            RadioState::Receiving,
            RadioState::Transmitting,
        ]
        .into_iter()
        .map(|s| self.rates.energy(s, self.time_in(s, at)))
        .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_day_is_the_floor() {
        let m = EnergyMeter::new(EnergyRates::default());
        let j = m.energy_report(SimTime::from_secs(86_400));
        // 86400 s / 320 us * 18.2 nJ
        assert!((j - 4.914).abs() < 1e-9, "{j}");
    }

    #[test]
    fn one_second_of_receive() {
        let mut m = EnergyMeter::new(EnergyRates::default());
        m.begin_rx(SimTime::ZERO);
        let j = m.energy_report(SimTime::from_secs(1));
        assert!((j - 0.0559375).abs() < 1e-12, "{j}");
    }

    #[test]
    fn zero_elapsed_is_zero() {
        let m = EnergyMeter::new(EnergyRates::default());
        assert_eq!(m.energy_report(SimTime::ZERO), 0.0);
    }

    #[test]
    fn transmit_overrides_receive() {
        let mut m = EnergyMeter::new(EnergyRates::default()).with_log();
        let us = SimTime::from_micros;
        m.begin_rx(us(0));
        m.begin_tx(us(320));
        assert_eq!(m.state(), RadioState::Transmitting);
        m.end_tx(us(640));
        assert_eq!(m.state(), RadioState::Receiving);
        m.end_rx(us(960));
        let r = EnergyRates::default();
        let expect = 2.0 * r.receiving_j + r.transmitting_j;
        assert!((m.energy_report(us(960)) - expect).abs() < 1e-15);
        assert_eq!(m.transitions().unwrap().len(), 5);
    }
}
