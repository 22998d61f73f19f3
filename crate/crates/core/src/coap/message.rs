use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MessageType {
    Con,
    Non,
    Ack,
    Rst,
}

impl MessageType {
    pub fn bits(self) -> u8 {
        match self {
            MessageType::Con => 0,
            MessageType::Non => 1,
            MessageType::Ack => 2,
            MessageType::Rst => 3,
        }
    }

    pub fn from_bits(b: u8) -> Self {
        match b & 0b11 {
            0 => MessageType::Con,
            1 => MessageType::Non,
            2 => MessageType::Ack,
            _ => MessageType::Rst,
        }
    }
}

/// The subset of request methods and response codes the simulator exchanges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Code {
    Empty,
    Get,
    Post,
    Created,
    Content,
    NotFound,
}

impl Code {
    /// `class.detail` packed as `ccc ddddd`.
    pub fn to_byte(self) -> u8 {
        let (class, detail) = match self {
            Code::Empty => (0, 0),
            Code::Get => (0, 1),
            Code::Post => (0, 2),
            Code::Created => (2, 1),
            Code::Content => (2, 5),
            Code::NotFound => (4, 4),
        };
        (class << 5) | detail
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        Ok(match (b >> 5, b & 0x1f) {
            (0, 0) => Code::Empty,
            (0, 1) => Code::Get,
            (0, 2) => Code::Post,
            (2, 1) => Code::Created,
            (2, 5) => Code::Content,
            (4, 4) => Code::NotFound,
            (c, d) => return Err(Error::Codec(format!("unsupported code {c}.{d:02}"))),
        })
    }

    pub fn is_request(self) -> bool {
        matches!(self, Code::Get | Code::Post)
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.to_byte();
        write!(f, "{}.{:02}", b >> 5, b & 0x1f)
    }
}

/// Opaque value of up to eight bytes, used for tokens and entity tags.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Opaque8 {
    len: u8,
    bytes: [u8; 8],
}

impl Opaque8 {
    pub const EMPTY: Opaque8 = Opaque8 {
        len: 0,
        bytes: [0; 8],
    };

    pub fn new(bytes: &[u8]) -> Result<Self> {
        if bytes.len() > 8 {
            return Err(Error::Codec(format!(
                "opaque value of {} bytes exceeds 8",
                bytes.len()
            )));
        }
        let mut b = [0u8; 8];
        b[..bytes.len()].copy_from_slice(bytes);
        Ok(Opaque8 {
            len: bytes.len() as u8,
            bytes: b,
        })
    }

    pub fn from_u32(v: u32) -> Self {
        Self::new(&v.to_be_bytes()).expect("4 bytes")
    }

    pub fn from_u64(v: u64) -> Self {
        Self::new(&v.to_be_bytes()).expect("8 bytes")
    }

    /// Big-endian integer view; values longer than 8 bytes cannot exist.
    pub fn as_u64(&self) -> u64 {
        self.as_bytes()
            .iter()
            .fold(0u64, |acc, b| (acc << 8) | *b as u64)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl fmt::Debug for Opaque8 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x")?;
        for b in self.as_bytes() {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

pub type Token = Opaque8;
pub type ETag = Opaque8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Options {
    /// Observe: 0 registers, 1 deregisters; notifications carry a sequence.
    pub observe: Option<u32>,
    /// Max-Age in seconds.
    pub max_age: Option<u32>,
    pub etag: Option<ETag>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoapMessage {
    pub mtype: MessageType,
    pub code: Code,
    pub message_id: u16,
    pub token: Token,
    pub options: Options,
    pub payload_len: u16,
}

impl CoapMessage {
    pub fn new(mtype: MessageType, code: Code, message_id: u16, token: Token) -> Self {
        CoapMessage {
            mtype,
            code,
            message_id,
            token,
            options: Options::default(),
            payload_len: 0,
        }
    }

    /// Empty ACK answering the message with `message_id`.
    pub fn empty_ack(message_id: u16) -> Self {
        Self::new(MessageType::Ack, Code::Empty, message_id, Token::EMPTY)
    }

    pub fn with_observe(mut self, seq: u32) -> Self {
        self.options.observe = Some(seq);
        self
    }

    pub fn with_etag(mut self, etag: ETag) -> Self {
        self.options.etag = Some(etag);
        self
    }

    pub fn with_max_age(mut self, secs: u32) -> Self {
        self.options.max_age = Some(secs);
        self
    }

    pub fn with_payload_len(mut self, len: u16) -> Self {
        self.payload_len = len;
        self
    }

    pub fn is_notification(&self) -> bool {
        self.code == Code::Content && self.options.observe.is_some()
    }
}
