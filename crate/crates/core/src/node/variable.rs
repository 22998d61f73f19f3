use crate::coap::ETag;
use crate::error::Result;
use crate::rng::RngStream;
use crate::time::SimTime;

/// A sensed quantity whose value changes at renewal instants with i.i.d.
/// exponential lifetimes.
#[derive(Clone, Debug)]
pub struct PhysicalVariable {
    pub resource: u32,
    version: u64,
    mean_lifetime: SimTime,
    changed_at: SimTime,
    next_change_at: SimTime,
    rng: RngStream,
}

impl PhysicalVariable {
    /// A variable whose first value is generated at `now`.
    pub fn new(
        resource: u32,
        mean_lifetime: SimTime,
        mut rng: RngStream,
        now: SimTime,
    ) -> Result<Self> {
        let next = now + rng.sample_exponential(mean_lifetime)?;
        Ok(PhysicalVariable {
            resource,
            version: 0,
            mean_lifetime,
            changed_at: now,
            next_change_at: next,
            rng,
        })
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn value_tag(&self) -> ETag {
        ETag::from_u32(self.version as u32)
    }

    pub fn changed_at(&self) -> SimTime {
        self.changed_at
    }

    pub fn next_change_at(&self) -> SimTime {
        self.next_change_at
    }

    /// Generates a new value at `now` (which must be the scheduled change
    /// instant) and returns the instant of the following change.
    pub fn advance(&mut self, now: SimTime) -> SimTime {
        debug_assert_eq!(now, self.next_change_at);
        self.version += 1;
        self.changed_at = now;
        let gap = self
            .rng
            .sample_exponential(self.mean_lifetime)
            .expect("mean validated at construction");
        self.next_change_at = now + gap;
        self.next_change_at
    }
}
