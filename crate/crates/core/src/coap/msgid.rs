use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::time::SimTime;

/// Sequential 16-bit message-ID source for one endpoint.
///
/// IDs are handed out in increasing order modulo 2^16. An ID stays reserved for
/// `lifetime` after it was issued; since IDs are issued in order, the reserved
/// set is always the most recent run of issued IDs, and the next counter value
/// is free unless all 65536 IDs are reserved.
#[derive(Clone, Debug)]
pub struct MessageIdAllocator {
    next: u16,
    lifetime: SimTime,
    live: VecDeque<SimTime>,
}

impl MessageIdAllocator {
    pub fn new(lifetime: SimTime) -> Self {
        Self::starting_at(0, lifetime)
    }

    pub fn starting_at(first: u16, lifetime: SimTime) -> Self {
        MessageIdAllocator {
            next: first,
            lifetime,
            live: VecDeque::new(),
        }
    }

    pub fn reserved(&self) -> usize {
        self.live.len()
    }

    pub fn next_message_id(&mut self, now: SimTime) -> Result<u16> {
        while let Some(issued) = self.live.front() {
            if now.saturating_sub(*issued) >= self.lifetime {
                self.live.pop_front();
            } else {
                break;
            }
        }
        if self.live.len() > u16::MAX as usize {
            return Err(Error::MessageIdExhausted);
        }
        let id = self.next;
        self.next = self.next.wrapping_add(1);
        self.live.push_back(now);
        Ok(id)
    }
}

/// Receiver-side duplicate detection keyed by `(source, message_id)`.
#[derive(Clone, Debug)]
pub struct Deduplicator<K> {
    lifetime: SimTime,
    seen: HashMap<(K, u16), SimTime>,
    order: VecDeque<(SimTime, K, u16)>,
}

impl<K: Copy + Eq + Hash> Deduplicator<K> {
    pub fn new(lifetime: SimTime) -> Self {
        Deduplicator {
            lifetime,
            seen: HashMap::new(),
            order: VecDeque::new(),
        }
    }

    fn expire(&mut self, now: SimTime) {
        while let Some(&(at, src, mid)) = self.order.front() {
            if now.saturating_sub(at) < self.lifetime {
                break;
            }
            self.order.pop_front();
            if self.seen.get(&(src, mid)) == Some(&at) {
                self.seen.remove(&(src, mid));
            }
        }
    }

    /// Returns `true` if the message was already seen within the lifetime.
    pub fn is_duplicate(&mut self, now: SimTime, src: K, message_id: u16) -> bool {
        self.expire(now);
        if self.seen.contains_key(&(src, message_id)) {
            return true;
        }
        self.seen.insert((src, message_id), now);
        self.order.push_back((now, src, message_id));
        false
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_endpoint_counts_up() {
        let mut a = MessageIdAllocator::new(SimTime::from_secs(145));
        let ids: Vec<u16> = (0..3)
            .map(|_| a.next_message_id(SimTime::ZERO).unwrap())
            .collect();
        assert_eq!(ids, [0, 1, 2]);
    }

    #[test]
    fn wraps_at_65535() {
        let mut a = MessageIdAllocator::starting_at(65535, SimTime::from_secs(1));
        assert_eq!(a.next_message_id(SimTime::ZERO).unwrap(), 65535);
        assert_eq!(a.next_message_id(SimTime::ZERO).unwrap(), 0);
    }

    #[test]
    fn exhaustion_is_backpressure() {
        let mut a = MessageIdAllocator::new(SimTime::from_secs(10));
        for _ in 0..65536 {
            a.next_message_id(SimTime::ZERO).unwrap();
        }
        assert_eq!(
            a.next_message_id(SimTime::from_secs(9)),
            Err(Error::MessageIdExhausted)
        );
        // Once the oldest reservations lapse the endpoint may send again.
        assert_eq!(a.next_message_id(SimTime::from_secs(10)).unwrap(), 0);
        assert_eq!(a.reserved(), 1);
    }

    #[test]
    fn duplicate_within_lifetime_is_flagged() {
        let mut d = Deduplicator::new(SimTime::from_secs(145));
        assert!(!d.is_duplicate(SimTime::ZERO, 7u32, 42));
        assert!(d.is_duplicate(SimTime::from_secs(100), 7, 42));
        assert!(!d.is_duplicate(SimTime::from_secs(100), 8, 42));
        assert!(!d.is_duplicate(SimTime::from_secs(200), 7, 42));
    }
}
