//! Deterministic discrete-event scheduler.
//!
//! Events are ordered by `(fire_at, seq)`. `seq` is assigned from a per-engine
//! counter at scheduling time, so events sharing a timestamp fire in insertion
//! order and two engines fed the same calls produce the same trace.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::error::{Error, Result};
use crate::time::SimTime;

/// Handle returned by [`Scheduler::schedule`]; used to cancel a pending event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn seq(self) -> u64 {
        self.0
    }
}

struct Entry<E> {
    fire_at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; invert so the earliest (time, seq) is on top.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<E>>,
    pending: HashSet<u64>,
    processed: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            pending: HashSet::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events still waiting to fire (cancelled ones excluded).
    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Total events processed by this engine since construction.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn schedule(&mut self, fire_at: SimTime, event: E) -> Result<EventHandle> {
        if fire_at < self.now {
            return Err(Error::ScheduleInPast {
                at: fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry {
            fire_at,
            seq,
            event,
        });
        self.pending.insert(seq);
        Ok(EventHandle(seq))
    }

    /// Schedules `delay` after the current time; cannot fail.
    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> EventHandle {
        let at = self.now.saturating_add(delay);
        self.schedule(at, event)
            .expect("relative schedule is never in the past")
    }

    /// Returns `true` if the event was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.pending.remove(&handle.0)
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.pending.contains(&handle.0)
    }

    /// Pops the next live event with `fire_at <= limit`, advancing the clock.
    pub fn pop_until(&mut self, limit: SimTime) -> Option<(SimTime, E)> {
        loop {
            let top = self.heap.peek()?;
            if top.fire_at > limit {
                return None;
            }
            let entry = self.heap.pop().expect("peeked");
            if !self.pending.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.fire_at >= self.now);
            self.now = entry.fire_at;
            self.processed += 1;
            return Some((entry.fire_at, entry.event));
        }
    }

    /// Processes every event with `fire_at <= t_end` and leaves the clock at
    /// `t_end`. Returns the number of events processed by this call.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Scheduler<E>, E),
    {
        let mut count = 0;
        while let Some((_, ev)) = self.pop_until(t_end) {
            handler(self, ev);
            count += 1;
        }
        if t_end > self.now {
            self.now = t_end;
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drain(s: &mut Scheduler<&'static str>, until: SimTime) -> Vec<(SimTime, &'static str)> {
        let mut trace = Vec::new();
        s.run_until(until, |s, e| trace.push((s.now(), e)));
        trace
    }

    #[test]
    fn now_fires_before_next_tick() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_ticks(1), "later").unwrap();
        s.schedule(SimTime::ZERO, "now").unwrap();
        let t = drain(&mut s, SimTime::from_secs(1));
        assert_eq!(t.iter().map(|x| x.1).collect::<Vec<_>>(), ["now", "later"]);
    }

    #[test]
    fn equal_times_fire_in_insertion_order() {
        let mut s = Scheduler::new();
        let at = SimTime::from_millis(3);
        for name in ["a", "b", "c", "d"] {
            s.schedule(at, name).unwrap();
        }
        let t = drain(&mut s, at);
        assert_eq!(
            t.iter().map(|x| x.1).collect::<Vec<_>>(),
            ["a", "b", "c", "d"]
        );
    }

    #[test]
    fn cancelled_event_never_fires() {
        let mut s = Scheduler::new();
        let h = s.schedule(SimTime::from_secs(1), "gone").unwrap();
        s.schedule(SimTime::from_secs(2), "kept").unwrap();
        assert!(s.cancel(h));
        assert!(!s.cancel(h));
        let t = drain(&mut s, SimTime::from_secs(5));
        assert_eq!(t, vec![(SimTime::from_secs(2), "kept")]);
    }

    #[test]
    fn empty_queue_advances_clock() {
        let mut s: Scheduler<()> = Scheduler::new();
        let n = s.run_until(SimTime::from_secs(3600), |_, _| {});
        assert_eq!(n, 0);
        assert_eq!(s.now(), SimTime::from_secs(3600));
    }

    #[test]
    fn future_event_is_not_processed_early() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(10), ()).unwrap();
        assert_eq!(s.run_until(SimTime::from_secs(5), |_, _| {}), 0);
        assert_eq!(s.now(), SimTime::from_secs(5));
        assert_eq!(s.pending_len(), 1);
    }

    #[test]
    fn scheduling_in_the_past_is_rejected() {
        let mut s: Scheduler<()> = Scheduler::new();
        s.run_until(SimTime::from_secs(2), |_, _| {});
        let err = s.schedule(SimTime::from_secs(1), ()).unwrap_err();
        assert!(matches!(err, Error::ScheduleInPast { .. }));
    }

    #[test]
    fn handler_can_schedule_at_now() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(1), 0u32).unwrap();
        let mut seen = Vec::new();
        s.run_until(SimTime::from_secs(2), |s, e| {
            seen.push((s.now(), e));
            if e < 3 {
                s.schedule_in(SimTime::ZERO, e + 1);
            }
        });
        assert_eq!(seen.len(), 4);
        assert!(seen.iter().all(|(t, _)| *t == SimTime::from_secs(1)));
    }
}
