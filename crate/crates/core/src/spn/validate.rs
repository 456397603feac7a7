use std::collections::{BTreeMap, HashSet};
use std::fmt;

use super::net::{CountExpr, PetriNet, TransitionKind};
use super::predicate::{Operand, Predicate};

/// A structural problem, naming the offending element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub element: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

impl PetriNet {
    /// Empty iff every structural invariant holds.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut diag = |element: &str, message: String| {
            out.push(Diagnostic {
                element: element.to_string(),
                message,
            });
        };

        let mut seen = BTreeMap::new();
        for p in &self.places {
            *seen.entry(p.name.as_str()).or_insert(0usize) += 1;
        }
        for (name, n) in &seen {
            if *n > 1 {
                diag(name, format!("place name declared {n} times"));
            }
        }
        let places: HashSet<&str> = seen.keys().copied().collect();

        let mut seen_t = BTreeMap::new();
        for t in &self.transitions {
            *seen_t.entry(t.name.as_str()).or_insert(0usize) += 1;
        }
        for (name, n) in &seen_t {
            if *n > 1 {
                diag(name, format!("transition name declared {n} times"));
            }
        }

        for t in &self.transitions {
            let name = t.name.as_str();
            match t.kind {
                TransitionKind::Immediate { weight, .. } => {
                    if !(weight.is_finite() && weight > 0.0) {
                        diag(
                            name,
                            format!("immediate weight must be positive, got {weight}"),
                        );
                    }
                    if t.inputs.is_empty() {
                        diag(
                            name,
                            "immediate transition without input arcs fires endlessly".into(),
                        );
                    }
                }
                TransitionKind::Exponential { mean_delay } => {
                    if !(mean_delay.is_finite() && mean_delay > 0.0) {
                        diag(
                            name,
                            format!("exponential mean delay must be positive, got {mean_delay}"),
                        );
                    }
                }
                TransitionKind::Deterministic { delay, allow_zero } => {
                    let ok = delay.is_finite() && (delay > 0.0 || (allow_zero && delay == 0.0));
                    if !ok {
                        diag(
                            name,
                            format!("deterministic delay must be positive, got {delay}"),
                        );
                    }
                }
            }

            let mut in_places = HashSet::new();
            let mut flush_inputs = Vec::new();
            for arc in &t.inputs {
                if !places.contains(arc.place.as_str()) {
                    diag(
                        name,
                        format!("input arc references unknown place '{}'", arc.place),
                    );
                }
                if !in_places.insert(arc.place.as_str()) {
                    diag(
                        name,
                        format!("more than one input arc from place '{}'", arc.place),
                    );
                }
                match &arc.count {
                    CountExpr::Constant(0) => {
                        diag(name, format!("input arc from '{}' has count 0", arc.place))
                    }
                    CountExpr::Constant(_) => {}
                    CountExpr::Param(p) => self.check_count_param(name, p, &mut diag),
                    CountExpr::FlushAll => flush_inputs.push(arc.place.as_str()),
                    CountExpr::Flushed(_) => diag(
                        name,
                        format!(
                            "Flushed count on input arc from '{}' (output arcs only)",
                            arc.place
                        ),
                    ),
                }
            }

            let mut out_places = HashSet::new();
            for arc in &t.outputs {
                if !places.contains(arc.place.as_str()) {
                    diag(
                        name,
                        format!("output arc references unknown place '{}'", arc.place),
                    );
                }
                if !out_places.insert(arc.place.as_str()) {
                    diag(
                        name,
                        format!("more than one output arc to place '{}'", arc.place),
                    );
                }
                match &arc.count {
                    CountExpr::Constant(0) => diag(name, format!("output arc to '{}' has count 0", arc.place)),
                    CountExpr::Constant(_) => {}
                    CountExpr::Param(p) => self.check_count_param(name, p, &mut diag),
                    CountExpr::FlushAll => {
                        diag(name, format!("FlushAll count on output arc to '{}' (input arcs only)", arc.place))
                    }
                    CountExpr::Flushed(source) => match source {
                        None if flush_inputs.is_empty() => diag(
                            name,
                            format!("Flushed output to '{}' without a FlushAll input arc", arc.place),
                        ),
                        None if flush_inputs.len() > 1 => diag(
                            name,
                            format!("Flushed output to '{}' is ambiguous: name its FlushAll source", arc.place),
                        ),
                        Some(src) if !flush_inputs.contains(&src.as_str()) => diag(
                            name,
                            format!("Flushed output to '{}' names '{src}', which is not a FlushAll input", arc.place),
                        ),
                        _ => {}
                    },
                }
            }

            if let Some(guard) = &t.guard {
                self.check_guard(name, guard, &places, &mut diag);
            }
        }
        out
    }

    fn check_count_param(&self, element: &str, param: &str, diag: &mut impl FnMut(&str, String)) {
        match self.parameters.get(param) {
            None => diag(element, format!("undeclared parameter '{param}'")),
            Some(v) if v.as_count().is_none() => diag(
                element,
                format!("parameter '{param}' = {v} is not a positive integer arc count"),
            ),
            Some(_) => {}
        }
    }

    fn check_guard(
        &self,
        element: &str,
        guard: &Predicate,
        places: &HashSet<&str>,
        diag: &mut impl FnMut(&str, String),
    ) {
        match guard {
            Predicate::Compare { place, rhs, .. } => {
                if !places.contains(place.as_str()) {
                    diag(element, format!("guard references unknown place '{place}'"));
                }
                match rhs {
                    Operand::Int(_) => {}
                    Operand::Param(p) => {
                        if !self.parameters.contains_key(p) {
                            diag(
                                element,
                                format!("guard references undeclared parameter '{p}'"),
                            );
                        }
                    }
                    Operand::Tokens(n) => {
                        if !places.contains(n.as_str()) && !self.parameters.contains_key(n) {
                            diag(
                                element,
                                format!("guard references unknown place or parameter '{n}'"),
                            );
                        }
                    }
                }
            }
            Predicate::And(ps) | Predicate::Or(ps) => {
                if ps.is_empty() {
                    diag(element, "empty conjunction/disjunction in guard".into());
                }
                ps.iter()
                    .for_each(|p| self.check_guard(element, p, places, diag));
            }
            Predicate::Not(p) => self.check_guard(element, p, places, diag),
        }
    }
}
