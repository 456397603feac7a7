use thiserror::Error;

use super::sim::SimulationResult;
use super::validate::Diagnostic;

#[derive(Debug, Error)]
pub enum SpnError {
    #[error("invalid net: {}", join(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("unknown place '{0}'")]
    UnknownPlace(String),
    #[error("unknown transition '{0}'")]
    UnknownTransition(String),
    #[error("marking has {got} entries but the net has {expected} places")]
    MarkingDimension { expected: usize, got: usize },
    #[error("contract violation: transition '{0}' fired while not enabled")]
    NotEnabled(String),
    #[error("token count overflow in place '{0}'")]
    Overflow(String),
    #[error("livelock: more than {steps} consecutive immediate firings cycling through {}", .transitions.join(", "))]
    Livelock {
        steps: u64,
        transitions: Vec<String>,
    },
    #[error("simulation diverged: place '{place}' holds {tokens} tokens at t = {time}")]
    Divergence {
        place: String,
        tokens: u64,
        time: f64,
    },
    #[error(
        "event cap of {max_events} reached at t = {time} with {completed_batches} batches complete"
    )]
    MaxEvents {
        max_events: u64,
        time: f64,
        completed_batches: usize,
        partial: Box<SimulationResult>,
    },
    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported model for the CTMC solver: {0}")]
    Unsupported(String),
    #[error("tangible state space exceeds {max_states} states (reached {reached})")]
    StateExplosion { max_states: usize, reached: usize },
    #[error(
        "vanishing loop: immediate transitions cycle without reaching a tangible marking ({0})"
    )]
    VanishingLoop(String),
    #[error("tangible marking {0} has no enabled timed transition; no stationary distribution")]
    Absorbing(String),
    #[error(
        "stationary solver did not converge after {iterations} sweeps (residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },
}

fn join(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
