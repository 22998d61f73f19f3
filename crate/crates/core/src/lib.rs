//! Deterministic discrete-event simulation of a CoAP sensor domain served by
//! a caching proxy over an 802.15.4-style CSMA channel.

pub mod coap;
pub mod engine;
pub mod error;
pub mod mac;
pub mod metrics;
pub mod node;
pub mod proxy;
pub mod rng;
pub mod scenario;
pub mod time;
pub mod types;

pub use error::{Error, Result};
pub use mac::{CsmaParams, Dest, Endpoint};
pub use metrics::MetricsSnapshot;
pub use scenario::{parse_config, run_scenario, ScenarioConfig, Sweep};
pub use time::SimTime;
pub use types::{FrameSizes, Packet, Scheme};
