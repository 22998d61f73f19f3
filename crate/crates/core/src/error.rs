use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("event scheduled in the past (at {at}, now {now})")]
    ScheduleInPast { at: SimTime, now: SimTime },

    #[error("message-id space exhausted within the lifetime window")]
    MessageIdExhausted,

    #[error("codec: {0}")]
    Codec(String),

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("config key `{key}`: {reason}")]
    ConfigValue { key: String, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
