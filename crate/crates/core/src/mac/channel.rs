use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxId(pub u64);

#[derive(Clone, Copy, Debug)]
struct OnAir {
    id: TxId,
    start: SimTime,
    corrupted: bool,
}

/// Single shared broadcast medium. Any two transmissions that overlap in time
/// corrupt each other; there is no capture effect.
#[derive(Clone, Debug, Default)]
pub struct Channel {
    on_air: Vec<OnAir>,
    last_end: SimTime,
    next_id: u64,
    started: u64,
    corrupted: u64,
}

impl Channel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_busy(&self) -> bool {
        !self.on_air.is_empty()
    }

    /// Whether the medium carried energy at any point in `[since, now]`.
    pub fn busy_since(&self, since: SimTime) -> bool {
        self.is_busy() || self.last_end > since
    }

    pub fn begin(&mut self, now: SimTime) -> TxId {
        let id = TxId(self.next_id);
        self.next_id += 1;
        self.started += 1;
        let overlap = !self.on_air.is_empty();
        if overlap {
            for tx in &mut self.on_air {
                tx.corrupted = true;
            }
        }
        self.on_air.push(OnAir {
            id,
            start: now,
            corrupted: overlap,
        });
        id
    }

    /// Ends a transmission and reports whether it was corrupted.
    pub fn end(&mut self, id: TxId, now: SimTime) -> bool {
        let pos = self
            .on_air
            .iter()
            .position(|t| t.id == id)
            .expect("ending a transmission that is not on air");
        let tx = self.on_air.swap_remove(pos);
        debug_assert!(now >= tx.start);
        if now > self.last_end {
            self.last_end = now;
        }
        if tx.corrupted {
            self.corrupted += 1;
        }
        tx.corrupted
    }

    pub fn transmissions_started(&self) -> u64 {
        self.started
    }

    pub fn transmissions_corrupted(&self) -> u64 {
        self.corrupted
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_corrupts_both() {
        let mut c = Channel::new();
        let us = SimTime::from_micros;
        let a = c.begin(us(0));
        let b = c.begin(us(100));
        assert!(c.end(a, us(200)));
        assert!(c.end(b, us(300)));
    }

    #[test]
    fn back_to_back_is_clean() {
        let mut c = Channel::new();
        let us = SimTime::from_micros;
        let a = c.begin(us(0));
        assert!(!c.end(a, us(100)));
        let b = c.begin(us(100));
        assert!(!c.end(b, us(200)));
        assert!(!c.busy_since(us(200)));
        assert!(c.busy_since(us(199)));
    }

    #[test]
    fn late_joiner_corrupts_ongoing_only_when_overlapping() {
        let mut c = Channel::new();
        let us = SimTime::from_micros;
        let a = c.begin(us(0));
        let b = c.begin(us(10));
        assert!(c.end(b, us(20)));
        let d = c.begin(us(30));
        assert!(c.end(a, us(40)));
        assert!(c.end(d, us(50)));
        let e = c.begin(us(60));
        assert!(!c.end(e, us(70)));
    }
}
