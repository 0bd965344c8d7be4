use thiserror::Error;

use crate::model::State;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("state (aoi={}, battery={}) outside the truncated state space", .0.aoi, .0.battery)]
    InvalidState(State),

    #[error("value iteration did not converge within {iterations} iterations (span residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("policy row q={battery} is not of threshold form: transmit at aoi={transmit_at} but idle at aoi={idle_at}")]
    NotThreshold {
        battery: u32,
        transmit_at: u32,
        idle_at: u32,
    },

    #[error("policy `{0}` is time-dependent; exact stationary evaluation needs a stationary policy")]
    NonStationaryPolicy(String),

    #[error("policy-induced chain has {0} closed classes; stationary distribution is not unique")]
    ReducibleChain(usize),

    #[error("stationary distribution did not converge within {iterations} sweeps (residual {residual:e})")]
    StationaryNotConverged { iterations: usize, residual: f64 },

    #[error("policy table shape does not match model parameters")]
    ShapeMismatch,
}

pub type Result<T> = std::result::Result<T, Error>;
