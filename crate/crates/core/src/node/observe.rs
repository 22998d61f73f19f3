use crate::coap::Token;
use crate::mac::Endpoint;

/// The observer list of one resource. Only the proxy observes, so the list
/// holds at most one registration.
#[derive(Clone, Debug, Default)]
pub struct ObserveRegistration {
    registration: Option<(Token, Endpoint)>,
    next_seq: u32,
    epoch: u32,
}

impl ObserveRegistration {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers (or re-registers) `observer`; returns the sequence number for
    /// the 2.05 response that confirms the registration.
    pub fn register(&mut self, token: Token, observer: Endpoint) -> u32 {
        self.registration = Some((token, observer));
        self.epoch += 1;
        self.next_notification_seq()
    }

    pub fn deregister(&mut self) {
        self.registration = None;
    }

    pub fn is_active(&self) -> bool {
        self.registration.is_some()
    }

    pub fn token(&self) -> Option<Token> {
        self.registration.map(|(t, _)| t)
    }

    pub fn observer(&self) -> Option<Endpoint> {
        self.registration.map(|(_, o)| o)
    }

    /// Registrations accepted so far.
    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    /// Next Observe value. The counter is shared by every epoch, so sequence
    /// numbers never repeat within the 24-bit space.
    pub fn next_notification_seq(&mut self) -> u32 {
        let s = self.next_seq;
        self.next_seq = (self.next_seq + 1) & 0x00ff_ffff;
        s
    }
}
