use std::fmt;

use super::compiled::{CompiledNet, Guard};
use super::error::SpnError;
use super::net::PetriNet;
use super::predicate::Predicate;

/// A steady-state reward measure.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RewardQuery {
    /// `E(place)`: time-averaged token count.
    ExpectedTokens(String),
    /// `P(cond)`: fraction of time the predicate holds.
    ProbabilityOf(Predicate),
    /// Firings per second.
    FiringRate(String),
}

impl RewardQuery {
    pub fn tokens(place: impl Into<String>) -> Self {
        RewardQuery::ExpectedTokens(place.into())
    }

    pub fn rate(transition: impl Into<String>) -> Self {
        RewardQuery::FiringRate(transition.into())
    }

    pub fn prob(pred: Predicate) -> Self {
        RewardQuery::ProbabilityOf(pred)
    }
}

impl fmt::Display for RewardQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardQuery::ExpectedTokens(p) => write!(f, "E({p})"),
            RewardQuery::ProbabilityOf(pred) => write!(f, "P({pred})"),
            RewardQuery::FiringRate(t) => write!(f, "rate({t})"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum CompiledQuery {
    Tokens(usize),
    Prob(Guard),
    Rate(usize),
}

impl CompiledQuery {
    /// Value at a marking; rate queries are counted at firings instead.
    pub(crate) fn level(&self, tokens: &[u64]) -> f64 {
        match self {
            CompiledQuery::Tokens(p) => tokens[*p] as f64,
            CompiledQuery::Prob(g) => {
                if g.eval(tokens) {
                    1.0
                } else {
                    0.0
                }
            }
            CompiledQuery::Rate(_) => 0.0,
        }
    }
}

pub(crate) fn compile_queries(
    net: &PetriNet,
    compiled: &CompiledNet,
    queries: &[RewardQuery],
) -> Result<Vec<CompiledQuery>, SpnError> {
    queries
        .iter()
        .map(|q| match q {
            RewardQuery::ExpectedTokens(p) => compiled
                .place_index(p)
                .map(CompiledQuery::Tokens)
                .ok_or_else(|| SpnError::UnknownPlace(p.clone())),
            RewardQuery::ProbabilityOf(pred) => compiled
                .compile_predicate(pred, net)
                .map(CompiledQuery::Prob),
            RewardQuery::FiringRate(t) => compiled
                .transition_index(t)
                .map(CompiledQuery::Rate)
                .ok_or_else(|| SpnError::UnknownTransition(t.clone())),
        })
        .collect()
}

/// A point value with a confidence half-width (zero for exact values).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub ci_halfwidth: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            ci_halfwidth: 0.0,
        }
    }

    /// `|value - other| <= ci_halfwidth + slack`
    pub fn covers(&self, other: f64, slack: f64) -> bool {
        (self.value - other).abs() <= self.ci_halfwidth + slack
    }
}

/// Anything that can answer reward queries: simulation batches or exact values.
pub trait RewardSource {
    /// Per-batch values of the query; exact sources return a single value.
    fn samples(&self, query: &RewardQuery) -> Option<&[f64]>;

    fn confidence_level(&self) -> f64;
}
