use thiserror::Error;

use crate::engine::{EngineError, SimTime};

/// Invalid scenario or topology description. `field` names the offending
/// config entry using dotted/indexed paths such as `links[3].loss_rate`.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("invalid configuration at `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// A TCP endpoint observed something its state machine cannot accept.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProtocolFault {
    #[error("flow {flow}: ack {ack_no} is beyond the highest byte sent ({snd_max})")]
    AckBeyondSent { flow: u32, ack_no: u64, snd_max: u64 },
    #[error("non-positive RTT sample {0}")]
    BadRttSample(f64),
}

/// Anything that aborts a simulation run.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("protocol fault at t={at}: {fault}")]
    Protocol { at: SimTime, fault: ProtocolFault },
    #[error(transparent)]
    Engine(#[from] EngineError),
}
