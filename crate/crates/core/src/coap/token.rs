use std::collections::VecDeque;

use crate::error::{invalid, Result};
use crate::time::SimTime;

use super::message::Token;

/// Hands out 4-byte counter tokens; no two outstanding exchanges share one
/// until the counter wraps after 2^32 requests.
#[derive(Clone, Debug, Default)]
pub struct TokenAllocator {
    next: u32,
}

impl TokenAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_token(&mut self) -> Token {
        let t = Token::from_u32(self.next);
        self.next = self.next.wrapping_add(1);
        t
    }
}

/// Survival function of a reply-delay distribution.
pub trait ReplyDelayTail {
    /// P(delay > x).
    fn tail(&self, x: SimTime) -> f64;
    /// Smallest `x` with `tail(x) == 0`, if the support is bounded.
    fn support_max(&self) -> Option<SimTime>;
}

/// Smallest `m >= 1` such that a reply delayed according to `delay` misses the
/// token window of `m` following MGETs, spaced at least `min_gap` apart, with
/// probability at most `epsilon`.
pub fn token_release_count_for<D: ReplyDelayTail + ?Sized>(
    delay: &D,
    min_gap: SimTime,
    epsilon: f64,
) -> Result<u32> {
    if min_gap == SimTime::ZERO {
        return Err(invalid("min_mget_gap", "must be positive"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", format!("{epsilon} is outside (0, 1)")));
    }
    let bound = delay
        .support_max()
        .map(|max| max.ticks().div_ceil(min_gap.ticks()).max(1))
        .unwrap_or(u32::MAX as u64);
    let mut m = 1u64;
    while m < bound {
        if delay.tail(min_gap * m) <= epsilon {
            break;
        }
        m += 1;
    }
    Ok(m.min(u32::MAX as u64) as u32)
}

struct Bounded(SimTime);

impl ReplyDelayTail for Bounded {
    fn tail(&self, x: SimTime) -> f64 {
        if x >= self.0 {
            0.0
        } else {
            1.0
        }
    }

    fn support_max(&self) -> Option<SimTime> {
        Some(self.0)
    }
}

/// Count rule for a leisure distribution with bounded support:
/// `max(1, ceil(leisure_max / min_mget_gap))`.
pub fn token_release_count(
    leisure_max: SimTime,
    min_mget_gap: SimTime,
    epsilon: f64,
) -> Result<u32> {
    token_release_count_for(&Bounded(leisure_max), min_mget_gap, epsilon)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TokenEntry {
    pub token: Token,
    pub issued_at: SimTime,
    pub mget_seq: u64,
    pub release_after: u32,
}

/// Tokens of recent MGET requests. The token used by MGET `k` is released when
/// MGET `k + release_after` is issued; replies carrying it afterwards are
/// unmatched.
#[derive(Clone, Debug, Default)]
pub struct MgetTokenTable {
    live: VecDeque<TokenEntry>,
    issued: u64,
    released: u64,
}

impl MgetTokenTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers the token of a new MGET and returns its sequence number
    /// together with any entries this issue releases.
    pub fn issue(
        &mut self,
        token: Token,
        now: SimTime,
        release_after: u32,
    ) -> (u64, Vec<TokenEntry>) {
        let seq = self.issued;
        self.issued += 1;
        let mut released = Vec::new();
        while let Some(e) = self.live.front() {
            if e.mget_seq + e.release_after as u64 <= seq {
                released.push(self.live.pop_front().unwrap());
            } else {
                break;
            }
        }
        // Entries are ordered by seq but release_after may change between
        // issues; sweep the rest too.
        let mut i = 0;
        while i < self.live.len() {
            let e = self.live[i];
            if e.mget_seq + e.release_after as u64 <= seq {
                released.push(self.live.remove(i).unwrap());
            } else {
                i += 1;
            }
        }
        self.released += released.len() as u64;
        self.live.push_back(TokenEntry {
            token,
            issued_at: now,
            mget_seq: seq,
            release_after: release_after.max(1),
        });
        (seq, released)
    }

    pub fn lookup(&self, token: Token) -> Option<&TokenEntry> {
        self.live.iter().find(|e| e.token == token)
    }

    pub fn live(&self) -> usize {
        self.live.len()
    }

    pub fn issued(&self) -> u64 {
        self.issued
    }

    pub fn released(&self) -> u64 {
        self.released
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn s(x: u64) -> SimTime {
        SimTime::from_secs(x)
    }

    #[test]
    fn ceiling_rule_examples() {
        assert_eq!(token_release_count(s(10), s(5), 1e-3).unwrap(), 2);
        assert_eq!(token_release_count(SimTime::ZERO, s(5), 1e-3).unwrap(), 1);
        assert_eq!(token_release_count(s(4), s(5), 1e-3).unwrap(), 1);
        assert_eq!(token_release_count(s(11), s(5), 1e-3).unwrap(), 3);
    }

    #[test]
    fn bad_parameters() {
        assert!(token_release_count(s(1), SimTime::ZERO, 1e-3).is_err());
        assert!(token_release_count(s(1), s(1), 0.0).is_err());
        assert!(token_release_count(s(1), s(1), 1.0).is_err());
    }

    #[test]
    fn unbounded_tail_uses_epsilon() {
        // Exponential delay with mean 1 s: P(D > m) = e^-m <= 1e-3 needs m = 7.
        struct Exp;
        impl ReplyDelayTail for Exp {
            fn tail(&self, x: SimTime) -> f64 {
                (-x.as_secs_f64()).exp()
            }
            fn support_max(&self) -> Option<SimTime> {
                None
            }
        }
        assert_eq!(token_release_count_for(&Exp, s(1), 1e-3).unwrap(), 7);
    }

    #[test]
    fn tokens_are_unique() {
        let mut a = TokenAllocator::new();
        let set: HashSet<_> = (0..10_000).map(|_| a.next_token()).collect();
        assert_eq!(set.len(), 10_000);
    }

    #[test]
    fn table_releases_after_m_following_mgets() {
        let mut a = TokenAllocator::new();
        let mut t = MgetTokenTable::new();
        let t0 = a.next_token();
        t.issue(t0, s(0), 2);
        let (_, rel) = t.issue(a.next_token(), s(60), 2);
        assert!(rel.is_empty());
        assert!(t.lookup(t0).is_some());
        let (seq, rel) = t.issue(a.next_token(), s(120), 2);
        assert_eq!(seq, 2);
        assert_eq!(rel.len(), 1);
        assert_eq!(rel[0].token, t0);
        assert!(t.lookup(t0).is_none());
        assert_eq!(t.live(), 2);
    }
}
