use crate::error::{invalid, Result};
use crate::time::SimTime;

/// Largest PHY payload of an IEEE 802.15.4 frame.
pub const MAX_FRAME_BYTES: u16 = 127;

/// Unslotted CSMA/CA and PHY timing parameters (2.4 GHz O-QPSK profile).
#[derive(Clone, Debug, PartialEq)]
pub struct CsmaParams {
    /// aUnitBackoffPeriod: 20 symbols.
    pub backoff_unit: SimTime,
    pub min_be: u32,
    pub max_be: u32,
    pub max_csma_backoffs: u32,
    pub max_frame_retries: u32,
    pub data_rate_bps: u64,
    /// Clear channel assessment window: 8 symbols.
    pub cca_duration: SimTime,
    /// RX-to-TX switch after a clear CCA: 12 symbols.
    pub turnaround: SimTime,
    /// How long a sender listens for the MAC ACK after its frame ends.
    pub ack_wait: SimTime,
    pub ack_bytes: u16,
}

impl Default for CsmaParams {
    fn default() -> Self {
        CsmaParams {
            backoff_unit: SimTime::from_micros(320),
            min_be: 3,
            max_be: 5,
            max_csma_backoffs: 4,
            max_frame_retries: 3,
            data_rate_bps: 250_000,
            cca_duration: SimTime::from_micros(128),
            turnaround: SimTime::from_micros(192),
            ack_wait: SimTime::from_micros(864),
            ack_bytes: 11,
        }
    }
}

impl CsmaParams {
    pub fn validate(&self) -> Result<()> {
        if self.backoff_unit == SimTime::ZERO {
            return Err(invalid("backoff_unit", "must be positive"));
        }
        if self.data_rate_bps == 0 {
            return Err(invalid("data_rate_bps", "must be positive"));
        }
        if self.min_be > self.max_be {
            return Err(invalid(
                "min_be",
                format!("min_be {} exceeds max_be {}", self.min_be, self.max_be),
            ));
        }
        if self.max_be > 20 {
            return Err(invalid("max_be", "must be at most 20"));
        }
        if self.ack_bytes == 0 || self.ack_bytes > MAX_FRAME_BYTES {
            return Err(invalid("ack_bytes", "must be in [1, 127]"));
        }
        let ack_end = self.backoff_unit + frame_airtime(self.ack_bytes, self)?;
        if self.ack_wait < ack_end {
            return Err(invalid(
                "ack_wait",
                format!("must cover turnaround plus ACK airtime ({ack_end})"),
            ));
        }
        Ok(())
    }

    pub fn ack_airtime(&self) -> SimTime {
        airtime_unchecked(self.ack_bytes, self.data_rate_bps)
    }
}

/// On-air duration of a frame, rounded up to whole ticks.
pub fn frame_airtime(length_bytes: u16, params: &CsmaParams) -> Result<SimTime> {
    if length_bytes == 0 || length_bytes > MAX_FRAME_BYTES {
        return Err(invalid(
            "length_bytes",
            format!("{length_bytes} is outside [1, {MAX_FRAME_BYTES}]"),
        ));
    }
    if params.data_rate_bps == 0 {
        return Err(invalid("data_rate_bps", "must be positive"));
    }
    Ok(airtime_unchecked(length_bytes, params.data_rate_bps))
}

fn airtime_unchecked(length_bytes: u16, rate: u64) -> SimTime {
    let bits = length_bytes as u64 * 8 * SimTime::TICKS_PER_SEC;
    SimTime::from_ticks(bits.div_ceil(rate))
}
