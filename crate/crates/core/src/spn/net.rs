//! Net structure: places, transitions, arcs and named parameters.
//!
//! A [`PetriNet`] refers to places by name so it can be written by hand or
//! parsed from text. Evaluation goes through [`CompiledNet`](super::CompiledNet),
//! which resolves every name to an index once.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Index, IndexMut};

use super::predicate::Predicate;

/// Index of a place in its net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlaceId(pub usize);

/// Index of a transition in its net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionId(pub usize);

/// Value of a named net parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
}

impl ParamValue {
    pub fn as_f64(self) -> f64 {
        match self {
            ParamValue::Int(v) => v as f64,
            ParamValue::Real(v) => v,
        }
    }

    /// The value as an arc multiplicity, if it is a positive integer.
    pub fn as_count(self) -> Option<u64> {
        match self {
            ParamValue::Int(v) if v >= 1 => Some(v as u64),
            ParamValue::Real(v) if v >= 1.0 && v.fract() == 0.0 && v < 9.0e15 => Some(v as u64),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => {
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    write!(f, "{v:.1}")
                } else {
                    write!(f, "{v}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Place {
    pub name: String,
    pub initial_tokens: u64,
}

/// Multiplicity of an arc.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CountExpr {
    /// A fixed count, at least 1.
    Constant(u64),
    /// The value of a declared integer parameter.
    Param(String),
    /// Input only: consume every token in the place (at least one must be present).
    FlushAll,
    /// Output only: produce as many tokens as a FlushAll input of the same firing
    /// consumed. The source place must be named when the transition has more
    /// than one FlushAll input.
    Flushed(Option<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arc {
    pub place: String,
    pub count: CountExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ServerSemantics {
    SingleServer,
    #[default]
    InfiniteServer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransitionKind {
    Immediate {
        priority: i32,
        weight: f64,
    },
    Exponential {
        mean_delay: f64,
    },
    /// `allow_zero` lets a zero delay through validation.
    Deterministic {
        delay: f64,
        allow_zero: bool,
    },
}

impl TransitionKind {
    pub fn is_immediate(&self) -> bool {
        matches!(self, TransitionKind::Immediate { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub name: String,
    pub kind: TransitionKind,
    /// Ignored for immediate transitions.
    pub server: ServerSemantics,
    pub guard: Option<Predicate>,
    pub inputs: Vec<Arc>,
    pub outputs: Vec<Arc>,
}

impl Transition {
    fn with_kind(name: impl Into<String>, kind: TransitionKind) -> Self {
        Transition {
            name: name.into(),
            kind,
            server: ServerSemantics::default(),
            guard: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Immediate transition with priority 1 and weight 1.
    pub fn immediate(name: impl Into<String>) -> Self {
        Self::with_kind(
            name,
            TransitionKind::Immediate {
                priority: 1,
                weight: 1.0,
            },
        )
    }

    pub fn exponential(name: impl Into<String>, mean_delay: f64) -> Self {
        Self::with_kind(name, TransitionKind::Exponential { mean_delay })
    }

    pub fn deterministic(name: impl Into<String>, delay: f64) -> Self {
        Self::with_kind(
            name,
            TransitionKind::Deterministic {
                delay,
                allow_zero: false,
            },
        )
    }

    pub fn priority(mut self, priority: i32) -> Self {
        if let TransitionKind::Immediate { priority: p, .. } = &mut self.kind {
            *p = priority;
        }
        self
    }

    pub fn weight(mut self, weight: f64) -> Self {
        if let TransitionKind::Immediate { weight: w, .. } = &mut self.kind {
            *w = weight;
        }
        self
    }

    /// Permit a zero delay on a deterministic transition.
    pub fn allow_zero_delay(mut self) -> Self {
        if let TransitionKind::Deterministic { allow_zero, .. } = &mut self.kind {
            *allow_zero = true;
        }
        self
    }

    pub fn single_server(mut self) -> Self {
        self.server = ServerSemantics::SingleServer;
        self
    }

    pub fn infinite_server(mut self) -> Self {
        self.server = ServerSemantics::InfiniteServer;
        self
    }

    pub fn guard(mut self, guard: Predicate) -> Self {
        self.guard = Some(guard);
        self
    }

    /// Input arc consuming one token.
    pub fn input(self, place: impl Into<String>) -> Self {
        self.input_n(place, CountExpr::Constant(1))
    }

    pub fn input_n(mut self, place: impl Into<String>, count: CountExpr) -> Self {
        self.inputs.push(Arc {
            place: place.into(),
            count,
        });
        self
    }

    /// Output arc producing one token.
    pub fn output(self, place: impl Into<String>) -> Self {
        self.output_n(place, CountExpr::Constant(1))
    }

    pub fn output_n(mut self, place: impl Into<String>, count: CountExpr) -> Self {
        self.outputs.push(Arc {
            place: place.into(),
            count,
        });
        self
    }
}

/// Immutable once built; see [`PetriNet::validate`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PetriNet {
    pub name: String,
    pub places: Vec<Place>,
    pub transitions: Vec<Transition>,
    pub parameters: BTreeMap<String, ParamValue>,
}

impl PetriNet {
    pub fn new(name: impl Into<String>) -> Self {
        PetriNet {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_place(&mut self, name: impl Into<String>, initial_tokens: u64) -> PlaceId {
        self.places.push(Place {
            name: name.into(),
            initial_tokens,
        });
        PlaceId(self.places.len() - 1)
    }

    pub fn add_transition(&mut self, transition: Transition) -> TransitionId {
        self.transitions.push(transition);
        TransitionId(self.transitions.len() - 1)
    }

    pub fn set_param(&mut self, name: impl Into<String>, value: ParamValue) {
        self.parameters.insert(name.into(), value);
    }

    pub fn place_id(&self, name: &str) -> Option<PlaceId> {
        self.places.iter().position(|p| p.name == name).map(PlaceId)
    }

    pub fn transition_id(&self, name: &str) -> Option<TransitionId> {
        self.transitions
            .iter()
            .position(|t| t.name == name)
            .map(TransitionId)
    }

    pub fn place(&self, id: PlaceId) -> &Place {
        &self.places[id.0]
    }

    pub fn transition(&self, id: TransitionId) -> &Transition {
        &self.transitions[id.0]
    }

    pub fn initial_marking(&self) -> Marking {
        Marking(self.places.iter().map(|p| p.initial_tokens).collect())
    }
}

/// Token count per place, indexed like the net's place list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking(pub Vec<u64>);

impl Marking {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[u64] {
        &self.0
    }
}

impl From<Vec<u64>> for Marking {
    fn from(tokens: Vec<u64>) -> Self {
        Marking(tokens)
    }
}

impl Index<PlaceId> for Marking {
    type Output = u64;
    fn index(&self, id: PlaceId) -> &u64 {
        &self.0[id.0]
    }
}

impl IndexMut<PlaceId> for Marking {
    fn index_mut(&mut self, id: PlaceId) -> &mut u64 {
        &mut self.0[id.0]
    }
}
