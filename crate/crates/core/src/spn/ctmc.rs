//! Exact steady-state solution for nets without deterministic transitions.
//!
//! Vanishing markings are eliminated on the fly: each one resolves to a
//! probability distribution over tangible markings plus the expected number of
//! firings of each immediate transition on the way, so immediate firing rates
//! come out exactly as well.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::rc::Rc;

use nalgebra::{DMatrix, DVector};

use super::compiled::CompiledNet;
use super::error::SpnError;
use super::net::{Marking, PetriNet, TransitionKind};
use super::reward::{compile_queries, CompiledQuery, RewardQuery, RewardSource};

/// State counts up to this size use a dense LU factorisation.
pub const DENSE_LIMIT: usize = 1500;
const MAX_VANISHING_DEPTH: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub queries: Vec<RewardQuery>,
    pub values: Vec<f64>,
    /// Tangible markings in discovery order.
    pub markings: Vec<Marking>,
    /// Stationary probability of each tangible marking.
    pub distribution: Vec<f64>,
}

impl ExactResult {
    pub fn value(&self, query: &RewardQuery) -> Option<f64> {
        self.queries
            .iter()
            .position(|q| q == query)
            .map(|i| self.values[i])
    }
}

impl RewardSource for ExactResult {
    fn samples(&self, query: &RewardQuery) -> Option<&[f64]> {
        let i = self.queries.iter().position(|q| q == query)?;
        Some(std::slice::from_ref(&self.values[i]))
    }

    fn confidence_level(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Default)]
struct Resolution {
    /// (tangible state, probability)
    targets: Vec<(usize, f64)>,
    /// (immediate transition, expected firings)
    firings: Vec<(usize, f64)>,
}

struct Explorer<'a> {
    net: &'a CompiledNet,
    max_states: usize,
    states: Vec<Vec<u64>>,
    index: HashMap<Vec<u64>, usize>,
    memo: HashMap<Vec<u64>, Rc<Resolution>>,
    in_progress: HashSet<Vec<u64>>,
}

impl<'a> Explorer<'a> {
    fn intern(&mut self, m: Vec<u64>) -> Result<usize, SpnError> {
        if let Some(&i) = self.index.get(&m) {
            return Ok(i);
        }
        if self.states.len() >= self.max_states {
            return Err(SpnError::StateExplosion {
                max_states: self.max_states,
                reached: self.states.len() + 1,
            });
        }
        let i = self.states.len();
        self.states.push(m.clone());
        self.index.insert(m, i);
        Ok(i)
    }

    fn resolve(&mut self, m: Vec<u64>, depth: usize) -> Result<Rc<Resolution>, SpnError> {
        let choices = self.net.immediate_choices(&m);
        if choices.is_empty() {
            let i = self.intern(m)?;
            return Ok(Rc::new(Resolution {
                targets: vec![(i, 1.0)],
                firings: Vec::new(),
            }));
        }
        if let Some(r) = self.memo.get(&m) {
            return Ok(r.clone());
        }
        if depth > MAX_VANISHING_DEPTH || !self.in_progress.insert(m.clone()) {
            return Err(SpnError::VanishingLoop(self.describe(&m)));
        }
        let total: f64 = choices.iter().map(|(_, w)| w).sum();
        let mut targets: BTreeMap<usize, f64> = BTreeMap::new();
        let mut firings: BTreeMap<usize, f64> = BTreeMap::new();
        for (t, w) in choices {
            let p = w / total;
            let mut next = m.clone();
            self.net.fire_tokens(t, &mut next)?;
            let sub = self.resolve(next, depth + 1)?;
            for &(s, q) in &sub.targets {
                *targets.entry(s).or_default() += p * q;
            }
            for &(u, c) in &sub.firings {
                *firings.entry(u).or_default() += p * c;
            }
            *firings.entry(t).or_default() += p;
        }
        self.in_progress.remove(&m);
        let r = Rc::new(Resolution {
            targets: targets.into_iter().collect(),
            firings: firings.into_iter().collect(),
        });
        self.memo.insert(m, r.clone());
        Ok(r)
    }

    fn describe(&self, m: &[u64]) -> String {
        let parts: Vec<String> = m
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(p, k)| format!("{}={k}", self.net.place_names[p]))
            .collect();
        format!("[{}]", parts.join(", "))
    }
}

/// Build the tangible reachability graph and solve `pi Q = 0`.
pub fn solve_ctmc(
    net: &PetriNet,
    queries: &[RewardQuery],
    max_states: usize,
) -> Result<ExactResult, SpnError> {
    let diags = net.validate();
    if !diags.is_empty() {
        return Err(SpnError::Invalid(diags));
    }
    let c = net.compile()?;
    if let Some(t) = c
        .transitions
        .iter()
        .find(|t| matches!(t.kind, TransitionKind::Deterministic { .. }))
    {
        return Err(SpnError::Unsupported(format!(
            "deterministic transition '{}'",
            t.name
        )));
    }
    let cq = compile_queries(net, &c, queries)?;

    let mut ex = Explorer {
        net: &c,
        max_states,
        states: Vec::new(),
        index: HashMap::new(),
        memo: HashMap::new(),
        in_progress: HashSet::new(),
    };
    // The initial marking may be vanishing; its resolution only seeds the search.
    ex.resolve(c.initial.clone(), 0)?;

    let timed: Vec<(usize, f64)> = c
        .transitions
        .iter()
        .enumerate()
        .filter_map(|(i, t)| match t.kind {
            TransitionKind::Exponential { mean_delay } => Some((i, mean_delay)),
            _ => None,
        })
        .collect();

    // Per state: (timed transition, rate, resolution of the successor)
    let mut edges: Vec<Vec<(usize, f64, Rc<Resolution>)>> = Vec::new();
    let mut next = 0;
    while next < ex.states.len() {
        let m = ex.states[next].clone();
        let mut out = Vec::new();
        for &(t, mean) in &timed {
            let d = c.sched_degree(t, &m);
            if d == 0 {
                continue;
            }
            let mut succ = m.clone();
            c.fire_tokens(t, &mut succ)?;
            let r = ex.resolve(succ, 0)?;
            out.push((t, d as f64 / mean, r));
        }
        if out.is_empty() {
            return Err(SpnError::Absorbing(ex.describe(&m)));
        }
        edges.push(out);
        next += 1;
    }

    let n = ex.states.len();
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for (i, out) in edges.iter().enumerate() {
        for (_, rate, r) in out {
            for &(j, p) in &r.targets {
                if j != i {
                    *rows[i].entry(j).or_default() += rate * p;
                }
            }
        }
    }
    let exit: Vec<f64> = rows.iter().map(|r| r.values().sum()).collect();
    if let Some(i) = exit.iter().position(|&e| e == 0.0) {
        if n > 1 {
            return Err(SpnError::Absorbing(ex.describe(&ex.states[i])));
        }
    }

    let pi = if n <= DENSE_LIMIT {
        solve_dense(&rows, &exit)?
    } else {
        solve_gauss_seidel(&rows, &exit)?
    };

    let values = cq
        .iter()
        .map(|q| match q {
            CompiledQuery::Tokens(_) | CompiledQuery::Prob(_) => {
                ex.states.iter().zip(&pi).map(|(m, p)| p * q.level(m)).sum()
            }
            CompiledQuery::Rate(t) => edges
                .iter()
                .zip(&pi)
                .map(|(out, p)| {
                    p * out
                        .iter()
                        .map(|(u, rate, r)| {
                            let own = if u == t { 1.0 } else { 0.0 };
                            let imm: f64 = r
                                .firings
                                .iter()
                                .filter(|(v, _)| v == t)
                                .map(|(_, k)| k)
                                .sum();
                            rate * (own + imm)
                        })
                        .sum::<f64>()
                })
                .sum(),
        })
        .collect();

    Ok(ExactResult {
        queries: queries.to_vec(),
        values,
        markings: ex.states.into_iter().map(Marking).collect(),
        distribution: pi,
    })
}

fn solve_dense(rows: &[BTreeMap<usize, f64>], exit: &[f64]) -> Result<Vec<f64>, SpnError> {
    let n = rows.len();
    // Q^T with the last equation replaced by normalisation.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        a[(i, i)] -= exit[i];
        for (&j, &q) in row {
            a[(j, i)] += q;
        }
    }
    for i in 0..n {
        a[(n - 1, i)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or(SpnError::NotConverged {
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    Ok(normalise(x.iter().copied().collect()))
}

fn solve_gauss_seidel(rows: &[BTreeMap<usize, f64>], exit: &[f64]) -> Result<Vec<f64>, SpnError> {
    const MAX_SWEEPS: usize = 100_000;
    const TOL: f64 = 1e-12;
    let n = rows.len();
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in rows.iter().enumerate() {
        for (&j, &q) in row {
            incoming[j].push((i, q));
        }
    }
    let mut pi = vec![1.0 / n as f64; n];
    let mut change = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        change = 0.0;
        for j in 0..n {
            let new = incoming[j].iter().map(|&(i, q)| pi[i] * q).sum::<f64>() / exit[j];
            change = f64::max(change, (new - pi[j]).abs());
            pi[j] = new;
        }
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= s);
        let scale = pi.iter().copied().fold(0.0, f64::max);
        if change / s <= TOL * scale {
            return Ok(normalise(pi));
        }
    }
    Err(SpnError::NotConverged {
        iterations: MAX_SWEEPS,
        residual: change,
    })
}

fn normalise(mut pi: Vec<f64>) -> Vec<f64> {
    pi.iter_mut().for_each(|p| {
        if *p < 0.0 {
            *p = 0.0;
        }
    });
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= s);
    pi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spn::{Cmp, CountExpr, Predicate, Transition};
    use approx::assert_relative_eq;

    fn mmck(lambda: f64, mu: f64, c: u64, k: u64) -> PetriNet {
        let mut net = PetriNet::new("mmck");
        net.add_place("FREE", k);
        net.add_place("Q", 0);
        net.add_place("SRV", c);
        net.add_place("BUSY", 0);
        net.add_transition(
            Transition::exponential("ARR", 1.0 / lambda)
                .single_server()
                .input("FREE")
                .output("Q"),
        );
        net.add_transition(
            Transition::immediate("START")
                .input("Q")
                .input("SRV")
                .output("BUSY"),
        );
        net.add_transition(
            Transition::exponential("DONE", 1.0 / mu)
                .input("BUSY")
                .output("SRV")
                .output("FREE"),
        );
        net
    }

    #[test]
    fn mm1k_closed_form() {
        let (lambda, mu, k) = (1.0, 1.5, 3u64);
        let rho: f64 = lambda / mu;
        let z: f64 = (0..=k).map(|i| rho.powi(i as i32)).sum();
        let en: f64 = (0..=k).map(|i| i as f64 * rho.powi(i as i32)).sum::<f64>() / z;
        let net = mmck(lambda, mu, 1, k);
        let q = [
            RewardQuery::tokens("BUSY"),
            RewardQuery::tokens("Q"),
            RewardQuery::rate("START"),
            RewardQuery::prob(Predicate::tokens("FREE", Cmp::Eq, 0)),
        ];
        let r = solve_ctmc(&net, &q, 100).unwrap();
        assert_eq!(r.markings.len(), k as usize + 1);
        assert_relative_eq!(r.values[0] + r.values[1], en, epsilon = 1e-12);
        let p_full = rho.powi(k as i32) / z;
        assert_relative_eq!(r.values[3], p_full, epsilon = 1e-12);
        // every accepted job starts service once
        assert_relative_eq!(r.values[2], lambda * (1.0 - p_full), epsilon = 1e-12);
    }

    #[test]
    fn dense_and_iterative_agree() {
        let net = mmck(3.0, 1.0, 2, 40);
        let q = [RewardQuery::tokens("Q")];
        let dense = solve_ctmc(&net, &q, 1000).unwrap();
        let n = dense.markings.len();
        // rebuild the generator and run the iterative solver directly
        let mut rows = vec![BTreeMap::new(); n];
        for (i, row) in rows.iter_mut().enumerate() {
            if i + 1 < n {
                row.insert(i + 1, 3.0);
            }
            if i > 0 {
                row.insert(i - 1, (i.min(2)) as f64);
            }
        }
        let exit: Vec<f64> = rows.iter().map(|r| r.values().sum()).collect();
        let gs = solve_gauss_seidel(&rows, &exit).unwrap();
        let dn = solve_dense(&rows, &exit).unwrap();
        for (a, b) in gs.iter().zip(&dn) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn deterministic_is_unsupported() {
        let mut net = PetriNet::new("d");
        net.add_place("A", 1);
        net.add_transition(Transition::deterministic("T", 1.0).input("A").output("A"));
        assert!(matches!(
            solve_ctmc(&net, &[], 10),
            Err(SpnError::Unsupported(_))
        ));
    }

    #[test]
    fn state_cap_is_enforced() {
        let net = mmck(1.0, 1.0, 1, 50);
        assert!(matches!(
            solve_ctmc(&net, &[], 10),
            Err(SpnError::StateExplosion { max_states: 10, .. })
        ));
    }

    #[test]
    fn vanishing_loop_is_reported() {
        let mut net = PetriNet::new("loop");
        net.add_place("A", 1);
        net.add_place("B", 0);
        net.add_transition(Transition::immediate("AB").input("A").output("B"));
        net.add_transition(Transition::immediate("BA").input("B").output("A"));
        assert!(matches!(
            solve_ctmc(&net, &[], 10),
            Err(SpnError::VanishingLoop(_))
        ));
    }

    #[test]
    fn flush_batch_service() {
        // Arrivals accumulate; a server takes everything waiting at once.
        let mut net = PetriNet::new("batch");
        net.add_place("FREE", 4);
        net.add_place("Q", 0);
        net.add_place("DONE", 0);
        net.add_transition(
            Transition::exponential("ARR", 1.0)
                .single_server()
                .input("FREE")
                .output("Q"),
        );
        net.add_transition(
            Transition::exponential("SERVE", 0.5)
                .single_server()
                .input_n("Q", CountExpr::FlushAll)
                .output_n("FREE", CountExpr::Flushed(None)),
        );
        let r = solve_ctmc(&net, &[RewardQuery::tokens("Q")], 100).unwrap();
        let s: f64 = r.distribution.iter().sum();
        assert_relative_eq!(s, 1.0, epsilon = 1e-12);
        assert_eq!(r.markings.len(), 5);
    }
}
