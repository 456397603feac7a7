//! Discrete-event simulation with batch-means steady-state estimates.
//!
//! Timed transitions use race-with-restart: each enabled unit of service
//! (the enabling degree for infinite-server transitions, one otherwise) holds
//! its own clock. After every firing the set of clocks is reconciled with the
//! new degree of each affected transition; surplus clocks are cancelled
//! (latest deadline first) and new units draw a fresh delay.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::compiled::{CompiledNet, LivelockGuard};
use super::error::SpnError;
use super::net::{PetriNet, TransitionKind};
use super::reward::{compile_queries, CompiledQuery, Estimate, RewardQuery, RewardSource};
use crate::stats;

/// Token count at which a place is declared divergent.
pub const DIVERGENCE_LIMIT: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Simulated seconds discarded before the first batch.
    pub warmup_time: f64,
    pub batch_count: usize,
    /// Simulated seconds per batch.
    pub batch_length: f64,
    pub confidence_level: f64,
    pub seed: u64,
    /// Cap on firings (timed and immediate) for the whole run.
    pub max_events: u64,
    /// Cap on consecutive immediate firings before reporting a livelock.
    pub max_immediate_steps: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            warmup_time: 100.0,
            batch_count: 30,
            batch_length: 100.0,
            confidence_level: 0.95,
            seed: 1,
            max_events: 1_000_000_000,
            max_immediate_steps: 1_000_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SpnError> {
        let bad = |m: String| Err(SpnError::InvalidConfig(m));
        if !(self.warmup_time.is_finite() && self.warmup_time >= 0.0) {
            return bad(format!(
                "warmup_time must be finite and >= 0, got {}",
                self.warmup_time
            ));
        }
        if self.batch_count < 2 {
            return bad(format!(
                "batch_count must be at least 2, got {}",
                self.batch_count
            ));
        }
        if !(self.batch_length.is_finite() && self.batch_length > 0.0) {
            return bad(format!(
                "batch_length must be positive, got {}",
                self.batch_length
            ));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return bad(format!(
                "confidence_level must lie in (0, 1), got {}",
                self.confidence_level
            ));
        }
        if self.max_events == 0 || self.max_immediate_steps == 0 {
            return bad("event caps must be positive".into());
        }
        Ok(())
    }

    pub fn end_time(&self) -> f64 {
        self.warmup_time + self.batch_count as f64 * self.batch_length
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryEstimate {
    pub query: RewardQuery,
    pub estimate: Estimate,
    pub batch_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub estimates: Vec<QueryEstimate>,
    /// Simulated time covered, warm-up included.
    pub simulated_time: f64,
    pub events: u64,
    pub seed: u64,
    pub confidence_level: f64,
}

impl SimulationResult {
    pub fn get(&self, query: &RewardQuery) -> Option<&QueryEstimate> {
        self.estimates.iter().find(|e| &e.query == query)
    }

    pub fn estimate(&self, query: &RewardQuery) -> Option<Estimate> {
        self.get(query).map(|e| e.estimate)
    }
}

impl RewardSource for SimulationResult {
    fn samples(&self, query: &RewardQuery) -> Option<&[f64]> {
        self.get(query).map(|e| e.batch_values.as_slice())
    }

    fn confidence_level(&self) -> f64 {
        self.confidence_level
    }
}

/// Hook into the event loop. Markings passed to `on_tangible` are tangible;
/// `on_fire` sees every firing, immediate ones included.
pub trait SimObserver {
    fn on_fire(&mut self, _time: f64, _transition: usize, _tokens: &[u64]) {}
    fn on_tangible(&mut self, _time: f64, _tokens: &[u64]) {}
}

impl SimObserver for () {}

pub fn simulate_stationary(
    net: &PetriNet,
    queries: &[RewardQuery],
    config: &SimConfig,
) -> Result<SimulationResult, SpnError> {
    simulate_observed(net, queries, config, &mut ())
}

pub fn simulate_observed<O: SimObserver>(
    net: &PetriNet,
    queries: &[RewardQuery],
    config: &SimConfig,
    observer: &mut O,
) -> Result<SimulationResult, SpnError> {
    config.validate()?;
    let diags = net.validate();
    if !diags.is_empty() {
        return Err(SpnError::Invalid(diags));
    }
    let compiled = net.compile()?;
    let cq = compile_queries(net, &compiled, queries)?;
    let mut engine = Engine::new(&compiled, config);
    let mut acc = Accumulator::new(config, &cq);
    match engine.run(&cq, &mut acc, config, observer) {
        Ok(()) => Ok(acc.result(
            queries,
            config,
            engine.now,
            engine.events,
            acc.batches.len(),
        )),
        Err(RunError::Spn(e)) => Err(e),
        Err(RunError::MaxEvents) => {
            let done = acc.completed_batches(engine.now);
            Err(SpnError::MaxEvents {
                max_events: config.max_events,
                time: engine.now,
                completed_batches: done,
                partial: Box::new(acc.result(queries, config, engine.now, engine.events, done)),
            })
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    time: f64,
    id: u64,
    transition: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.id.cmp(&other.id))
    }
}

#[derive(Debug, Clone, Copy)]
enum Delay {
    None,
    Exp(f64),
    Fixed(f64),
}

enum RunError {
    Spn(SpnError),
    MaxEvents,
}

impl From<SpnError> for RunError {
    fn from(e: SpnError) -> Self {
        RunError::Spn(e)
    }
}

struct Engine<'a> {
    net: &'a CompiledNet,
    delays: Vec<Delay>,
    tokens: Vec<u64>,
    now: f64,
    /// Live clocks per transition as (deadline, id).
    clocks: Vec<Vec<(f64, u64)>>,
    /// Min-heap of deadlines; entries whose id is no longer live are stale.
    heap: BinaryHeap<Reverse<Pending>>,
    live: usize,
    next_id: u64,
    events: u64,
    max_events: u64,
    livelock: LivelockGuard,
    rng: ChaCha8Rng,
}

impl<'a> Engine<'a> {
    fn new(net: &'a CompiledNet, config: &SimConfig) -> Self {
        let delays = net
            .transitions
            .iter()
            .map(|t| match t.kind {
                TransitionKind::Immediate { .. } => Delay::None,
                TransitionKind::Exponential { mean_delay } => Delay::Exp(mean_delay),
                TransitionKind::Deterministic { delay, .. } => Delay::Fixed(delay),
            })
            .collect();
        Engine {
            net,
            delays,
            tokens: net.initial.clone(),
            now: 0.0,
            clocks: vec![Vec::new(); net.transitions.len()],
            heap: BinaryHeap::new(),
            live: 0,
            next_id: 0,
            events: 0,
            max_events: config.max_events,
            livelock: LivelockGuard::new(config.max_immediate_steps),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        }
    }

    fn sample(&mut self, t: usize) -> f64 {
        match self.delays[t] {
            Delay::Exp(mean) => mean * self.rng.sample::<f64, _>(Exp1),
            Delay::Fixed(d) => d,
            Delay::None => unreachable!("immediate transitions have no clock"),
        }
    }

    fn reconcile(&mut self, t: usize) {
        if matches!(self.delays[t], Delay::None) {
            return;
        }
        let target = self.net.sched_degree(t, &self.tokens) as usize;
        let current = self.clocks[t].len();
        if target > current {
            for _ in current..target {
                let time = self.now + self.sample(t);
                let id = self.next_id;
                self.next_id += 1;
                self.clocks[t].push((time, id));
                self.heap.push(Reverse(Pending {
                    time,
                    id,
                    transition: t,
                }));
            }
            self.live += target - current;
        } else if target < current {
            let c = &mut self.clocks[t];
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            c.truncate(target);
            self.live -= current - target;
        }
        if self.heap.len() > 4 * self.live + 1024 {
            self.compact();
        }
    }

    fn compact(&mut self) {
        let entries: Vec<_> = self
            .clocks
            .iter()
            .enumerate()
            .flat_map(|(t, c)| {
                c.iter().map(move |&(time, id)| {
                    Reverse(Pending {
                        time,
                        id,
                        transition: t,
                    })
                })
            })
            .collect();
        self.heap = BinaryHeap::from(entries);
    }

    /// Earliest live clock, discarding stale heap entries.
    fn next_pending(&mut self) -> Option<Pending> {
        while let Some(&Reverse(p)) = self.heap.peek() {
            if self.clocks[p.transition].iter().any(|&(_, id)| id == p.id) {
                return Some(p);
            }
            self.heap.pop();
        }
        None
    }

    fn fire(&mut self, t: usize) -> Result<(), RunError> {
        self.net.fire_tokens(t, &mut self.tokens)?;
        self.events += 1;
        for &p in &self.net.touched[t] {
            if self.tokens[p] > DIVERGENCE_LIMIT {
                return Err(SpnError::Divergence {
                    place: self.net.place_names[p].clone(),
                    tokens: self.tokens[p],
                    time: self.now,
                }
                .into());
            }
        }
        for i in 0..self.net.affected[t].len() {
            let u = self.net.affected[t][i];
            self.reconcile(u);
        }
        if self.events >= self.max_events {
            return Err(RunError::MaxEvents);
        }
        Ok(())
    }

    fn vanish<O: SimObserver>(
        &mut self,
        acc: &mut Accumulator,
        observer: &mut O,
    ) -> Result<(), RunError> {
        self.livelock.reset();
        while let Some(t) = self.net.choose_immediate(&self.tokens, &mut self.rng) {
            self.livelock.step(t, self.net)?;
            self.fire(t)?;
            acc.count(self.now, t);
            observer.on_fire(self.now, t, &self.tokens);
        }
        Ok(())
    }

    fn run<O: SimObserver>(
        &mut self,
        queries: &[CompiledQuery],
        acc: &mut Accumulator,
        config: &SimConfig,
        observer: &mut O,
    ) -> Result<(), RunError> {
        let end = config.end_time();
        for t in 0..self.net.transitions.len() {
            self.reconcile(t);
        }
        self.vanish(acc, observer)?;
        let mut levels: Vec<f64> = queries.iter().map(|q| q.level(&self.tokens)).collect();
        observer.on_tangible(self.now, &self.tokens);
        loop {
            let next = self.next_pending();
            let t_next = next.map_or(f64::INFINITY, |p| p.time);
            if t_next >= end {
                acc.advance(self.now, end, &levels);
                self.now = end;
                return Ok(());
            }
            let p = next.expect("finite deadline");
            acc.advance(self.now, p.time, &levels);
            self.now = p.time;
            self.heap.pop();
            let c = &mut self.clocks[p.transition];
            let pos = c
                .iter()
                .position(|&(_, id)| id == p.id)
                .expect("live clock");
            c.swap_remove(pos);
            self.live -= 1;
            self.fire(p.transition)?;
            acc.count(self.now, p.transition);
            observer.on_fire(self.now, p.transition, &self.tokens);
            self.vanish(acc, observer)?;
            for (l, q) in levels.iter_mut().zip(queries) {
                *l = q.level(&self.tokens);
            }
            observer.on_tangible(self.now, &self.tokens);
        }
    }
}

/// Time-weighted integrals and firing counts per batch.
struct Accumulator {
    warmup: f64,
    length: f64,
    /// [batch][query]
    batches: Vec<Vec<f64>>,
    /// Query index of each rate query, per transition.
    rate_slots: Vec<Vec<usize>>,
    cursor: usize,
    boundary: f64,
}

impl Accumulator {
    fn new(config: &SimConfig, queries: &[CompiledQuery]) -> Self {
        let n_t = queries
            .iter()
            .filter_map(|q| {
                if let CompiledQuery::Rate(t) = q {
                    Some(*t + 1)
                } else {
                    None
                }
            })
            .max()
            .unwrap_or(0);
        let mut rate_slots = vec![Vec::new(); n_t];
        for (i, q) in queries.iter().enumerate() {
            if let CompiledQuery::Rate(t) = q {
                rate_slots[*t].push(i);
            }
        }
        Accumulator {
            warmup: config.warmup_time,
            length: config.batch_length,
            batches: vec![vec![0.0; queries.len()]; config.batch_count],
            rate_slots,
            cursor: 0,
            boundary: config.warmup_time + config.batch_length,
        }
    }

    /// Batch containing `time`, moving the cursor forward; None outside the
    /// observation window.
    fn batch_at(&mut self, time: f64) -> Option<usize> {
        if time < self.warmup {
            return None;
        }
        while time >= self.boundary && self.cursor < self.batches.len() {
            self.cursor += 1;
            self.boundary = self.warmup + (self.cursor + 1) as f64 * self.length;
        }
        (self.cursor < self.batches.len()).then_some(self.cursor)
    }

    fn advance(&mut self, from: f64, to: f64, levels: &[f64]) {
        let mut from = from.max(self.warmup);
        while from < to {
            let Some(b) = self.batch_at(from) else { return };
            let seg_end = to.min(self.boundary);
            let dt = seg_end - from;
            for (a, l) in self.batches[b].iter_mut().zip(levels) {
                *a += l * dt;
            }
            from = seg_end;
        }
    }

    fn count(&mut self, time: f64, t: usize) {
        if t >= self.rate_slots.len() || self.rate_slots[t].is_empty() {
            return;
        }
        if let Some(b) = self.batch_at(time) {
            for &q in &self.rate_slots[t] {
                self.batches[b][q] += 1.0;
            }
        }
    }

    fn completed_batches(&self, now: f64) -> usize {
        if now < self.warmup {
            return 0;
        }
        (((now - self.warmup) / self.length).floor() as usize).min(self.batches.len())
    }

    fn result(
        &self,
        queries: &[RewardQuery],
        config: &SimConfig,
        time: f64,
        events: u64,
        batches: usize,
    ) -> SimulationResult {
        let estimates = queries
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let batch_values: Vec<f64> = self.batches[..batches]
                    .iter()
                    .map(|b| b[i] / self.length)
                    .collect();
                QueryEstimate {
                    query: q.clone(),
                    estimate: stats::summarize(&batch_values, config.confidence_level),
                    batch_values,
                }
            })
            .collect();
        SimulationResult {
            estimates,
            simulated_time: time,
            events,
            seed: config.seed,
            confidence_level: config.confidence_level,
        }
    }
}
