//! Index-resolved form of a net and the firing rules shared by both evaluators.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::Rng;

use super::error::SpnError;
use super::net::{CountExpr, Marking, PetriNet, ServerSemantics, TransitionId, TransitionKind};
use super::predicate::{Cmp, Operand, Predicate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum InCount {
    Count(u64),
    Flush,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum OutCount {
    Count(u64),
    /// Index into the transition's input arc list of the FlushAll source.
    Flushed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Guard {
    Cmp {
        place: usize,
        cmp: Cmp,
        rhs: GuardRhs,
    },
    And(Vec<Guard>),
    Or(Vec<Guard>),
    Not(Box<Guard>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum GuardRhs {
    Const(f64),
    Tokens(usize),
}

impl Guard {
    pub(crate) fn eval(&self, tokens: &[u64]) -> bool {
        match self {
            Guard::Cmp { place, cmp, rhs } => {
                let lhs = tokens[*place];
                match rhs {
                    GuardRhs::Tokens(p) => cmp.holds(lhs, tokens[*p]),
                    GuardRhs::Const(v) => cmp.holds(lhs as f64, *v),
                }
            }
            Guard::And(gs) => gs.iter().all(|g| g.eval(tokens)),
            Guard::Or(gs) => gs.iter().any(|g| g.eval(tokens)),
            Guard::Not(g) => !g.eval(tokens),
        }
    }

    fn places(&self, out: &mut Vec<usize>) {
        match self {
            Guard::Cmp { place, rhs, .. } => {
                out.push(*place);
                if let GuardRhs::Tokens(p) = rhs {
                    out.push(*p);
                }
            }
            Guard::And(gs) | Guard::Or(gs) => gs.iter().for_each(|g| g.places(out)),
            Guard::Not(g) => g.places(out),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CTransition {
    pub name: String,
    pub kind: TransitionKind,
    pub server: ServerSemantics,
    pub guard: Option<Guard>,
    pub inputs: Vec<(usize, InCount)>,
    pub outputs: Vec<(usize, OutCount)>,
    pub has_flush: bool,
}

impl CTransition {
    fn immediate_params(&self) -> (i32, f64) {
        match self.kind {
            TransitionKind::Immediate { priority, weight } => (priority, weight),
            _ => (i32::MIN, 0.0),
        }
    }
}

/// A net with every name resolved. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct CompiledNet {
    pub(crate) place_names: Vec<String>,
    pub(crate) initial: Vec<u64>,
    pub(crate) transitions: Vec<CTransition>,
    pub(crate) immediates: Vec<usize>,
    /// Per transition: every transition whose enabling may change when it fires
    /// (always including itself).
    pub(crate) affected: Vec<Vec<usize>>,
    /// Per transition: places whose count may change when it fires.
    pub(crate) touched: Vec<Vec<usize>>,
    place_index: HashMap<String, usize>,
    transition_index: HashMap<String, usize>,
}

impl CompiledNet {
    /// Resolve names. Structural validation is separate ([`PetriNet::validate`]);
    /// this only fails when a reference cannot be resolved.
    pub fn compile(net: &PetriNet) -> Result<CompiledNet, SpnError> {
        let mut place_index = HashMap::new();
        for (i, p) in net.places.iter().enumerate() {
            place_index.entry(p.name.clone()).or_insert(i);
        }
        let mut transition_index = HashMap::new();
        for (i, t) in net.transitions.iter().enumerate() {
            transition_index.entry(t.name.clone()).or_insert(i);
        }
        let place = |name: &str| {
            place_index
                .get(name)
                .copied()
                .ok_or_else(|| SpnError::UnknownPlace(name.into()))
        };
        let param = |name: &str| {
            net.parameters
                .get(name)
                .copied()
                .ok_or_else(|| SpnError::UnknownParameter(name.into()))
        };
        let count_param = |name: &str| {
            let v = param(name)?;
            v.as_count().ok_or_else(|| {
                SpnError::Invalid(vec![super::Diagnostic {
                    element: name.into(),
                    message: format!("parameter value {v} is not a positive integer arc count"),
                }])
            })
        };

        let mut transitions = Vec::with_capacity(net.transitions.len());
        for t in &net.transitions {
            let invalid = |message: String| {
                SpnError::Invalid(vec![super::Diagnostic {
                    element: t.name.clone(),
                    message,
                }])
            };
            let mut inputs = Vec::with_capacity(t.inputs.len());
            for arc in &t.inputs {
                let count = match &arc.count {
                    CountExpr::Constant(k) => InCount::Count(*k),
                    CountExpr::Param(p) => InCount::Count(count_param(p)?),
                    CountExpr::FlushAll => InCount::Flush,
                    CountExpr::Flushed(_) => {
                        return Err(invalid(format!("Flushed input arc from '{}'", arc.place)))
                    }
                };
                inputs.push((place(&arc.place)?, count));
            }
            let flush_inputs: Vec<usize> = inputs
                .iter()
                .enumerate()
                .filter(|(_, (_, c))| *c == InCount::Flush)
                .map(|(i, _)| i)
                .collect();
            let mut outputs = Vec::with_capacity(t.outputs.len());
            for arc in &t.outputs {
                let count = match &arc.count {
                    CountExpr::Constant(k) => OutCount::Count(*k),
                    CountExpr::Param(p) => OutCount::Count(count_param(p)?),
                    CountExpr::FlushAll => {
                        return Err(invalid(format!("FlushAll output arc to '{}'", arc.place)))
                    }
                    CountExpr::Flushed(None) => match flush_inputs.as_slice() {
                        [only] => OutCount::Flushed(*only),
                        [] => {
                            return Err(invalid(format!(
                                "Flushed output to '{}' without FlushAll input",
                                arc.place
                            )))
                        }
                        _ => {
                            return Err(invalid(format!(
                                "ambiguous Flushed output to '{}'",
                                arc.place
                            )))
                        }
                    },
                    CountExpr::Flushed(Some(src)) => {
                        let src_place = place(src)?;
                        let idx = flush_inputs
                            .iter()
                            .copied()
                            .find(|&i| inputs[i].0 == src_place)
                            .ok_or_else(|| {
                                invalid(format!("Flushed source '{src}' is not a FlushAll input"))
                            })?;
                        OutCount::Flushed(idx)
                    }
                };
                outputs.push((place(&arc.place)?, count));
            }
            let guard = t
                .guard
                .as_ref()
                .map(|g| compile_guard(g, &place_index, net))
                .transpose()?;
            transitions.push(CTransition {
                name: t.name.clone(),
                kind: t.kind,
                server: t.server,
                guard,
                has_flush: !flush_inputs.is_empty(),
                inputs,
                outputs,
            });
        }

        let n_places = net.places.len();
        let mut place_deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_places];
        for (ti, t) in transitions.iter().enumerate() {
            for (p, _) in &t.inputs {
                place_deps[*p].insert(ti);
            }
            if let Some(g) = &t.guard {
                let mut ps = Vec::new();
                g.places(&mut ps);
                for p in ps {
                    place_deps[p].insert(ti);
                }
            }
        }
        let mut affected = Vec::with_capacity(transitions.len());
        let mut touched = Vec::with_capacity(transitions.len());
        for (ti, t) in transitions.iter().enumerate() {
            let places: BTreeSet<usize> = t
                .inputs
                .iter()
                .map(|(p, _)| *p)
                .chain(t.outputs.iter().map(|(p, _)| *p))
                .collect();
            let mut deps: BTreeSet<usize> = places
                .iter()
                .flat_map(|p| place_deps[*p].iter().copied())
                .collect();
            deps.insert(ti);
            affected.push(deps.into_iter().collect());
            touched.push(places.into_iter().collect());
        }

        let immediates = transitions
            .iter()
            .enumerate()
            .filter(|(_, t)| t.kind.is_immediate())
            .map(|(i, _)| i)
            .collect();

        Ok(CompiledNet {
            place_names: net.places.iter().map(|p| p.name.clone()).collect(),
            initial: net.places.iter().map(|p| p.initial_tokens).collect(),
            transitions,
            immediates,
            affected,
            touched,
            place_index,
            transition_index,
        })
    }

    pub fn place_count(&self) -> usize {
        self.place_names.len()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn place_name(&self, p: usize) -> &str {
        &self.place_names[p]
    }

    pub fn transition_name(&self, t: TransitionId) -> &str {
        &self.transitions[t.0].name
    }

    pub fn place_index(&self, name: &str) -> Option<usize> {
        self.place_index.get(name).copied()
    }

    pub fn transition_index(&self, name: &str) -> Option<usize> {
        self.transition_index.get(name).copied()
    }

    pub fn initial_marking(&self) -> Marking {
        Marking(self.initial.clone())
    }

    pub fn kind(&self, t: TransitionId) -> TransitionKind {
        self.transitions[t.0].kind
    }

    /// Compile a guard-language predicate against this net's names.
    pub(crate) fn compile_predicate(
        &self,
        pred: &Predicate,
        params: &PetriNet,
    ) -> Result<Guard, SpnError> {
        compile_guard(pred, &self.place_index, params)
    }

    /// Enabling degree: 0 when disabled; otherwise the minimum of
    /// `floor(tokens / count)` over counted input arcs, clamped to 1 when any
    /// FlushAll arc is present (and 1 when there are no counted arcs).
    pub(crate) fn degree(&self, t: usize, tokens: &[u64]) -> u64 {
        let tr = &self.transitions[t];
        let mut degree = u64::MAX;
        for &(p, c) in &tr.inputs {
            let have = tokens[p];
            match c {
                InCount::Count(k) => degree = degree.min(have / k),
                InCount::Flush => {
                    if have == 0 {
                        return 0;
                    }
                }
            }
            if degree == 0 {
                return 0;
            }
        }
        if let Some(g) = &tr.guard {
            if !g.eval(tokens) {
                return 0;
            }
        }
        if degree == u64::MAX || tr.has_flush {
            1
        } else {
            degree
        }
    }

    /// Number of concurrently scheduled firings: the enabling degree for
    /// infinite-server timed transitions, at most 1 otherwise.
    pub(crate) fn sched_degree(&self, t: usize, tokens: &[u64]) -> u64 {
        let d = self.degree(t, tokens);
        let tr = &self.transitions[t];
        match (tr.kind, tr.server) {
            (TransitionKind::Immediate { .. }, _) | (_, ServerSemantics::SingleServer) => d.min(1),
            _ => d,
        }
    }

    /// Fire `t` in place; returns the number of tokens FlushAll arcs consumed.
    pub(crate) fn fire_tokens(&self, t: usize, tokens: &mut [u64]) -> Result<u64, SpnError> {
        if self.degree(t, tokens) == 0 {
            return Err(SpnError::NotEnabled(self.transitions[t].name.clone()));
        }
        let tr = &self.transitions[t];
        let mut flushed: Vec<u64> = if tr.has_flush {
            vec![0; tr.inputs.len()]
        } else {
            Vec::new()
        };
        let mut total = 0u64;
        for (i, &(p, c)) in tr.inputs.iter().enumerate() {
            let take = match c {
                InCount::Count(k) => k,
                InCount::Flush => {
                    let k = tokens[p];
                    total += k;
                    flushed[i] = k;
                    k
                }
            };
            // degree > 0 guarantees enough tokens
            tokens[p] -= take;
        }
        for &(p, c) in &tr.outputs {
            let add = match c {
                OutCount::Count(k) => k,
                OutCount::Flushed(i) => flushed[i],
            };
            tokens[p] = tokens[p]
                .checked_add(add)
                .ok_or_else(|| SpnError::Overflow(self.place_names[p].clone()))?;
        }
        Ok(total)
    }

    /// Pick the immediate transition to fire next, if any is enabled: highest
    /// priority first, then proportional to weight.
    pub(crate) fn choose_immediate<R: Rng + ?Sized>(
        &self,
        tokens: &[u64],
        rng: &mut R,
    ) -> Option<usize> {
        let mut best = i32::MIN;
        let mut total = 0.0;
        let mut count = 0usize;
        let mut first = 0usize;
        for &t in &self.immediates {
            if self.degree(t, tokens) == 0 {
                continue;
            }
            let (priority, weight) = self.transitions[t].immediate_params();
            if priority > best {
                best = priority;
                total = 0.0;
                count = 0;
            }
            if priority == best {
                if count == 0 {
                    first = t;
                }
                total += weight;
                count += 1;
            }
        }
        match count {
            0 => None,
            1 => Some(first),
            _ => {
                let mut u = rng.random::<f64>() * total;
                let mut last = first;
                for &t in &self.immediates {
                    let (priority, weight) = self.transitions[t].immediate_params();
                    if priority != best || self.degree(t, tokens) == 0 {
                        continue;
                    }
                    if u < weight {
                        return Some(t);
                    }
                    u -= weight;
                    last = t;
                }
                Some(last)
            }
        }
    }

    /// Enabled immediate transitions of maximal priority with their weights.
    pub(crate) fn immediate_choices(&self, tokens: &[u64]) -> Vec<(usize, f64)> {
        let mut best = i32::MIN;
        let mut out = Vec::new();
        for &t in &self.immediates {
            if self.degree(t, tokens) == 0 {
                continue;
            }
            let (priority, weight) = self.transitions[t].immediate_params();
            if priority > best {
                best = priority;
                out.clear();
            }
            if priority == best {
                out.push((t, weight));
            }
        }
        out
    }

    fn check_dim(&self, marking: &Marking) -> Result<(), SpnError> {
        if marking.len() != self.place_count() {
            return Err(SpnError::MarkingDimension {
                expected: self.place_count(),
                got: marking.len(),
            });
        }
        Ok(())
    }

    /// Every enabled transition with its enabling degree.
    pub fn enabled_set(&self, marking: &Marking) -> Result<Vec<(TransitionId, u64)>, SpnError> {
        self.check_dim(marking)?;
        Ok((0..self.transitions.len())
            .filter_map(|t| {
                let d = self.degree(t, marking.tokens());
                (d > 0).then_some((TransitionId(t), d))
            })
            .collect())
    }

    /// Fire `t`, returning the successor marking and the FlushAll count.
    pub fn fire(&self, marking: &Marking, t: TransitionId) -> Result<(Marking, u64), SpnError> {
        self.check_dim(marking)?;
        if t.0 >= self.transitions.len() {
            return Err(SpnError::UnknownTransition(format!("#{}", t.0)));
        }
        let mut next = marking.clone();
        let flushed = self.fire_tokens(t.0, &mut next.0)?;
        Ok((next, flushed))
    }

    pub fn is_tangible(&self, marking: &Marking) -> bool {
        self.immediates
            .iter()
            .all(|&t| self.degree(t, marking.tokens()) == 0)
    }

    /// Fire immediate transitions until the marking is tangible.
    pub fn vanish<R: Rng + ?Sized>(
        &self,
        marking: &Marking,
        rng: &mut R,
        max_steps: u64,
    ) -> Result<Marking, SpnError> {
        self.check_dim(marking)?;
        let mut m = marking.clone();
        let mut guard = LivelockGuard::new(max_steps);
        while let Some(t) = self.choose_immediate(m.tokens(), rng) {
            guard.step(t, self)?;
            self.fire_tokens(t, &mut m.0)?;
        }
        Ok(m)
    }
}

/// Counts consecutive immediate firings and remembers the recent ones so a
/// livelock error can name the cycle.
pub(crate) struct LivelockGuard {
    max_steps: u64,
    steps: u64,
    recent: VecDeque<usize>,
}

impl LivelockGuard {
    pub(crate) fn new(max_steps: u64) -> Self {
        LivelockGuard {
            max_steps,
            steps: 0,
            recent: VecDeque::new(),
        }
    }

    pub(crate) fn reset(&mut self) {
        self.steps = 0;
        self.recent.clear();
    }

    pub(crate) fn step(&mut self, t: usize, net: &CompiledNet) -> Result<(), SpnError> {
        self.steps += 1;
        if self.recent.len() == 64 {
            self.recent.pop_front();
        }
        self.recent.push_back(t);
        if self.steps > self.max_steps {
            let names: BTreeSet<&str> = self
                .recent
                .iter()
                .map(|&t| net.transitions[t].name.as_str())
                .collect();
            return Err(SpnError::Livelock {
                steps: self.max_steps,
                transitions: names.into_iter().map(String::from).collect(),
            });
        }
        Ok(())
    }
}

fn compile_guard(
    pred: &Predicate,
    places: &HashMap<String, usize>,
    net: &PetriNet,
) -> Result<Guard, SpnError> {
    Ok(match pred {
        Predicate::Compare { place, cmp, rhs } => {
            let lhs = *places
                .get(place)
                .ok_or_else(|| SpnError::UnknownPlace(place.clone()))?;
            let rhs = match rhs {
                Operand::Int(v) => GuardRhs::Const(*v as f64),
                Operand::Param(p) => GuardRhs::Const(
                    net.parameters
                        .get(p)
                        .ok_or_else(|| SpnError::UnknownParameter(p.clone()))?
                        .as_f64(),
                ),
                Operand::Tokens(n) => match places.get(n) {
                    Some(&idx) => GuardRhs::Tokens(idx),
                    None => GuardRhs::Const(
                        net.parameters
                            .get(n)
                            .ok_or_else(|| SpnError::UnknownParameter(n.clone()))?
                            .as_f64(),
                    ),
                },
            };
            Guard::Cmp {
                place: lhs,
                cmp: *cmp,
                rhs,
            }
        }
        Predicate::And(ps) => Guard::And(
            ps.iter()
                .map(|p| compile_guard(p, places, net))
                .collect::<Result<_, _>>()?,
        ),
        Predicate::Or(ps) => Guard::Or(
            ps.iter()
                .map(|p| compile_guard(p, places, net))
                .collect::<Result<_, _>>()?,
        ),
        Predicate::Not(p) => Guard::Not(Box::new(compile_guard(p, places, net)?)),
    })
}

impl PetriNet {
    pub fn compile(&self) -> Result<CompiledNet, SpnError> {
        CompiledNet::compile(self)
    }

    /// See [`CompiledNet::enabled_set`].
    pub fn enabled_set(&self, marking: &Marking) -> Result<Vec<(TransitionId, u64)>, SpnError> {
        self.compile()?.enabled_set(marking)
    }

    /// See [`CompiledNet::fire`].
    pub fn fire(&self, marking: &Marking, t: TransitionId) -> Result<(Marking, u64), SpnError> {
        self.compile()?.fire(marking, t)
    }

    /// See [`CompiledNet::vanish`].
    pub fn vanish<R: Rng + ?Sized>(
        &self,
        marking: &Marking,
        rng: &mut R,
        max_steps: u64,
    ) -> Result<Marking, SpnError> {
        self.compile()?.vanish(marking, rng, max_steps)
    }
}
