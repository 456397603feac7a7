//! Generalized stochastic Petri nets: model, simulation and exact solution.

mod compiled;
mod ctmc;
mod dot;
mod error;
mod format;
mod net;
mod predicate;
mod reward;
mod sim;
mod validate;

pub use compiled::CompiledNet;
pub use ctmc::{solve_ctmc, ExactResult, DENSE_LIMIT};
pub use error::SpnError;
pub use format::FormatError;
pub use net::{
    Arc, CountExpr, Marking, ParamValue, PetriNet, Place, PlaceId, ServerSemantics, Transition,
    TransitionId, TransitionKind,
};
pub use predicate::{Cmp, Operand, Predicate, PredicateParseError};
pub use reward::{Estimate, RewardQuery, RewardSource};
pub use sim::{
    simulate_observed, simulate_stationary, QueryEstimate, SimConfig, SimObserver,
    SimulationResult, DIVERGENCE_LIMIT,
};
pub use validate::Diagnostic;
