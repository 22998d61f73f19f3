//! Constrained application protocol messages, codec and endpoint state.

pub mod codec;
pub mod message;
pub mod msgid;
pub mod token;
pub mod transmission;

pub use codec::{decode, encode_header};
pub use message::{CoapMessage, Code, ETag, MessageType, Opaque8, Options, Token};
pub use msgid::{Deduplicator, MessageIdAllocator};
pub use token::{
    token_release_count, token_release_count_for, MgetTokenTable, ReplyDelayTail, TokenAllocator,
    TokenEntry,
};
pub use transmission::{
    retransmission_schedule, retransmission_schedule_with_factor, RetransmissionSchedule,
    RetxAction, RetxState, TransmissionParams,
};
