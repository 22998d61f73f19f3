use std::fmt;
use std::str::FromStr;

use crate::coap::CoapMessage;
use crate::error::{invalid, Error, Result};
use crate::time::SimTime;

/// How the proxy keeps its cache fresh.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Nodes POST every change; the proxy validates stale records by unicast GET.
    PostGet,
    /// The proxy polls the whole group with one multicast GET.
    Mget,
    /// Nodes notify observers; the proxy re-registers stale records.
    ObserveGet,
    /// No application traffic at all.
    Idle,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::PostGet, Scheme::Mget, Scheme::ObserveGet];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::PostGet => "post-get",
            Scheme::Mget => "mget",
            Scheme::ObserveGet => "observe-get",
            Scheme::Idle => "none",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "post-get" => Ok(Scheme::PostGet),
            "mget" => Ok(Scheme::Mget),
            "observe-get" => Ok(Scheme::ObserveGet),
            "none" => Ok(Scheme::Idle),
            other => Err(invalid(
                "scheme",
                format!("`{other}` is not one of post-get, mget, observe-get, none"),
            )),
        }
    }
}

/// MAC frame lengths, in bytes, for each kind of CoAP message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameSizes {
    /// Frames carrying a resource value.
    pub data: u16,
    /// Requests, empty ACKs, 2.01 and 4.04 responses.
    pub request: u16,
}

impl Default for FrameSizes {
    fn default() -> Self {
        FrameSizes {
            data: 127,
            request: 20,
        }
    }
}

/// What travels inside a MAC frame: the CoAP message plus simulator-side
/// bookkeeping that a real stack would carry in the URI or not at all.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Packet {
    pub msg: CoapMessage,
    pub resource: u32,
    /// Version of the resource value carried, if any.
    pub version: Option<u64>,
    /// Leisure the sender held the reply for; subtracted from measured RTT.
    pub leisure_held: SimTime,
    /// Unprompted observe notification rather than a response.
    pub notification: bool,
}

impl Packet {
    pub fn new(msg: CoapMessage, resource: u32) -> Self {
        Packet {
            msg,
            resource,
            version: None,
            leisure_held: SimTime::ZERO,
            notification: false,
        }
    }

    pub fn with_version(mut self, version: u64) -> Self {
        self.version = Some(version);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_round_trips_through_text() {
        for s in Scheme::ALL.into_iter().chain([Scheme::Idle]) {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
        assert!("post".parse::<Scheme>().is_err());
    }
}
