//! Performance metrics of the transaction-flow model, from any
//! [`RewardSource`]. Point values are functions of the per-query means and
//! confidence intervals come from the same function applied batch by batch.

use thiserror::Error;

use crate::hlf::HlfNetHandle;
use crate::spn::{
    simulate_stationary, Cmp, Estimate, Predicate, RewardQuery, RewardSource, SimConfig,
    SimulationResult, SpnError,
};
use crate::stats;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("result lacks queries: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("mean response time undefined: effective arrival rate {0} <= 0")]
    UndefinedMrt(f64),
    #[error("zero capacity for {0}")]
    ZeroCapacity(String),
    #[error("no node {node} in stage {stage:?}")]
    UnknownNode { stage: Stage, node: usize },
    #[error(transparent)]
    Spn(#[from] SpnError),
}

/// How discards enter Little's law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MrtMode {
    /// `TIP / arrival_rate`
    Literal,
    /// `TIP / (arrival_rate * (1 - DP))`
    #[default]
    Effective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Endorse,
    Order,
    Commit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mrt_s: Estimate,
    pub tip: Estimate,
    pub tip_endorse: Estimate,
    pub tip_order: Estimate,
    pub tip_commit: Estimate,
    pub dp_prob: Estimate,
    pub u_end: Estimate,
    pub u_ord: Estimate,
    pub u_com: Estimate,
    pub u_end_nodes: Vec<Estimate>,
    pub u_com_nodes: Vec<Estimate>,
    pub tp_tps: Estimate,
    pub tp_nodes: Vec<Estimate>,
    pub block_call_rate: Estimate,
    pub timeout_call_rate: Estimate,
}

/// Name of a query, for error messages.
fn describe(q: &RewardQuery) -> String {
    q.to_string()
}

/// Evaluate `f` on the query means (point value) and on every batch (CI).
fn combine<S: RewardSource + ?Sized>(
    src: &S,
    queries: &[RewardQuery],
    f: impl Fn(&[f64]) -> f64,
) -> Result<Estimate, MetricsError> {
    let mut missing = Vec::new();
    let mut series = Vec::with_capacity(queries.len());
    for q in queries {
        match src.samples(q) {
            Some(s) => series.push(s),
            None => missing.push(describe(q)),
        }
    }
    if !missing.is_empty() {
        return Err(MetricsError::Missing(missing));
    }
    let n = series.iter().map(|s| s.len()).min().unwrap_or(0);
    if n == 0 {
        return Ok(Estimate::exact(f(&vec![0.0; queries.len()])));
    }
    let means: Vec<f64> = series.iter().map(|s| stats::mean(&s[..n])).collect();
    let value = f(&means);
    if n < 2 {
        return Ok(Estimate::exact(value));
    }
    let mut row = vec![0.0; queries.len()];
    let batch: Vec<f64> = (0..n)
        .map(|b| {
            for (r, s) in row.iter_mut().zip(&series) {
                *r = s[b];
            }
            f(&row)
        })
        .collect();
    let spread = stats::summarize(&batch, src.confidence_level());
    let ci = if spread.ci_halfwidth.is_finite() {
        spread.ci_halfwidth
    } else {
        f64::INFINITY
    };
    Ok(Estimate {
        value,
        ci_halfwidth: ci,
    })
}

fn tokens(places: &[String]) -> Vec<RewardQuery> {
    places.iter().map(RewardQuery::tokens).collect()
}

fn sum(v: &[f64]) -> f64 {
    v.iter().sum()
}

/// `P(all endorser queues full)`, the entry discard condition.
pub fn entry_full(h: &HlfNetHandle) -> Predicate {
    let parts: Vec<Predicate> = h
        .names
        .endorsers
        .iter()
        .map(|e| Predicate::tokens(e.queue_capacity.clone(), Cmp::Eq, 0))
        .collect();
    if parts.len() == 1 {
        parts.into_iter().next().expect("one endorser")
    } else {
        Predicate::and(parts)
    }
}

/// Every query the metric functions read, plus firing rates used for cross-checks.
pub fn required_queries(h: &HlfNetHandle) -> Vec<RewardQuery> {
    let n = &h.names;
    let mut q = tokens(&n.in_progress());
    q.push(RewardQuery::prob(entry_full(h)));
    for e in &n.endorsers {
        q.push(RewardQuery::tokens(&e.proc_capacity));
    }
    q.push(RewardQuery::tokens(&n.orderer.proc_capacity));
    for c in &n.committers {
        q.push(RewardQuery::tokens(&c.proc_capacity));
        q.push(RewardQuery::rate(&c.service));
    }
    for t in [
        &n.arrival,
        &n.entry_drop,
        &n.orderer.te4,
        &n.orderer.te5,
        &n.orderer.cut_full,
        &n.orderer.cut_partial,
    ] {
        q.push(RewardQuery::rate(t));
    }
    for t in &n.commit_drop {
        q.push(RewardQuery::rate(t));
    }
    q.sort_by_key(|a| a.to_string());
    q.dedup();
    q
}

pub fn transactions_in_progress<S: RewardSource + ?Sized>(
    src: &S,
    h: &HlfNetHandle,
) -> Result<Estimate, MetricsError> {
    combine(src, &tokens(&h.names.in_progress()), sum)
}

pub fn stage_in_progress<S: RewardSource + ?Sized>(
    src: &S,
    h: &HlfNetHandle,
    stage: Stage,
) -> Result<Estimate, MetricsError> {
    let places = match stage {
        Stage::Endorse => h.names.endorse_in_progress(),
        Stage::Order => h.names.order_in_progress(),
        Stage::Commit => h.names.commit_in_progress(),
    };
    combine(src, &tokens(&places), sum)
}

pub fn discard_probability<S: RewardSource + ?Sized>(
    src: &S,
    h: &HlfNetHandle,
) -> Result<Estimate, MetricsError> {
    combine(src, &[RewardQuery::prob(entry_full(h))], |v| v[0])
}

pub fn mrt<S: RewardSource + ?Sized>(
    src: &S,
    h: &HlfNetHandle,
    arrival_rate: f64,
    mode: MrtMode,
) -> Result<Estimate, MetricsError> {
    let mut queries = tokens(&h.names.in_progress());
    let k = queries.len();
    queries.push(RewardQuery::prob(entry_full(h)));
    let rate = |dp: f64| match mode {
        MrtMode::Literal => arrival_rate,
        MrtMode::Effective => arrival_rate * (1.0 - dp),
    };
    let point = combine(src, &queries, |v| rate(v[k]))?;
    if point.value.is_nan() || point.value <= 0.0 {
        return Err(MetricsError::UndefinedMrt(point.value));
    }
    // A batch with every arrival discarded has no response time; it maps to +inf.
    combine(src, &queries, |v| {
        let r = rate(v[k]);
        if r > 0.0 {
            sum(&v[..k]) / r
        } else {
            f64::INFINITY
        }
    })
}

/// Busy fraction `(capacity - E(free)) / capacity` of one node (1-based), or
/// the stage mean when `node` is `None`.
pub fn stage_utilization<S: RewardSource + ?Sized>(
    src: &S,
    h: &HlfNetHandle,
    stage: Stage,
    node: Option<usize>,
) -> Result<Estimate, MetricsError> {
    let cfg = &h.config;
    let nodes: Vec<(String, u64)> = match stage {
        Stage::Endorse => h
            .names
            .endorsers
            .iter()
            .zip(&cfg.ep)
            .map(|(e, &c)| (e.proc_capacity.clone(), c))
            .collect(),
        Stage::Order => vec![(h.names.orderer.proc_capacity.clone(), cfg.op_1)],
        Stage::Commit => h
            .names
            .committers
            .iter()
            .zip(&cfg.cp)
            .map(|(e, &c)| (e.proc_capacity.clone(), c))
            .collect(),
    };
    let chosen: Vec<(String, u64)> = match node {
        None => nodes,
        Some(i) => vec![nodes
            .get(i.wrapping_sub(1))
            .cloned()
            .ok_or(MetricsError::UnknownNode { stage, node: i })?],
    };
    if let Some((p, _)) = chosen.iter().find(|(_, c)| *c == 0) {
        return Err(MetricsError::ZeroCapacity(p.clone()));
    }
    let caps: Vec<f64> = chosen.iter().map(|(_, c)| *c as f64).collect();
    let queries: Vec<RewardQuery> = chosen.iter().map(|(p, _)| RewardQuery::tokens(p)).collect();
    combine(src, &queries, |v| {
        v.iter()
            .zip(&caps)
            .map(|(free, cap)| (cap - free) / cap)
            .sum::<f64>()
            / caps.len() as f64
    })
}

/// Delivered transactions per second: `E(CPF_i) / te_commit_i` averaged over
/// committers, or for one committer (1-based).
pub fn throughput<S: RewardSource + ?Sized>(
    src: &S,
    h: &HlfNetHandle,
    node: Option<usize>,
) -> Result<Estimate, MetricsError> {
    let all: Vec<(String, f64)> = h
        .names
        .committers
        .iter()
        .zip(&h.config.te_commit)
        .map(|(c, &t)| (c.proc_fill.clone(), t))
        .collect();
    let chosen = match node {
        None => all,
        Some(i) => vec![all
            .get(i.wrapping_sub(1))
            .cloned()
            .ok_or(MetricsError::UnknownNode {
                stage: Stage::Commit,
                node: i,
            })?],
    };
    let means: Vec<f64> = chosen.iter().map(|(_, t)| *t).collect();
    let queries: Vec<RewardQuery> = chosen.iter().map(|(p, _)| RewardQuery::tokens(p)).collect();
    combine(src, &queries, |v| {
        v.iter().zip(&means).map(|(e, t)| e / t).sum::<f64>() / means.len() as f64
    })
}

/// Full blocks cut per second: `E(FULLBLK_1) / te4`.
pub fn block_call_rate<S: RewardSource + ?Sized>(
    src: &S,
    h: &HlfNetHandle,
) -> Result<Estimate, MetricsError> {
    let te4 = h.config.te4;
    combine(
        src,
        &[RewardQuery::tokens(&h.names.orderer.full_block)],
        |v| v[0] / te4,
    )
}

/// Timeout-cut blocks per second: `E(PARTBLK_1) / te5`.
pub fn timeout_call_rate<S: RewardSource + ?Sized>(
    src: &S,
    h: &HlfNetHandle,
) -> Result<Estimate, MetricsError> {
    let te5 = h.config.te5;
    combine(
        src,
        &[RewardQuery::tokens(&h.names.orderer.partial_block)],
        |v| v[0] / te5,
    )
}

pub fn report<S: RewardSource + ?Sized>(
    src: &S,
    h: &HlfNetHandle,
    mode: MrtMode,
) -> Result<MetricReport, MetricsError> {
    let lambda = h
        .config
        .arrival_rate()
        .ok_or(MetricsError::UndefinedMrt(0.0))?;
    let per_node = |stage: Stage, n: usize| {
        (1..=n)
            .map(|i| stage_utilization(src, h, stage, Some(i)))
            .collect::<Result<Vec<_>, _>>()
    };
    Ok(MetricReport {
        mrt_s: mrt(src, h, lambda, mode)?,
        tip: transactions_in_progress(src, h)?,
        tip_endorse: stage_in_progress(src, h, Stage::Endorse)?,
        tip_order: stage_in_progress(src, h, Stage::Order)?,
        tip_commit: stage_in_progress(src, h, Stage::Commit)?,
        dp_prob: discard_probability(src, h)?,
        u_end: stage_utilization(src, h, Stage::Endorse, None)?,
        u_ord: stage_utilization(src, h, Stage::Order, None)?,
        u_com: stage_utilization(src, h, Stage::Commit, None)?,
        u_end_nodes: per_node(Stage::Endorse, h.names.endorsers.len())?,
        u_com_nodes: per_node(Stage::Commit, h.names.committers.len())?,
        tp_tps: throughput(src, h, None)?,
        tp_nodes: (1..=h.names.committers.len())
            .map(|i| throughput(src, h, Some(i)))
            .collect::<Result<_, _>>()?,
        block_call_rate: block_call_rate(src, h)?,
        timeout_call_rate: timeout_call_rate(src, h)?,
    })
}

/// Simulate the model with every query the report needs.
pub fn simulate_report(
    h: &HlfNetHandle,
    sim: &SimConfig,
    mode: MrtMode,
) -> Result<(MetricReport, SimulationResult), MetricsError> {
    let result = simulate_stationary(&h.net, &required_queries(h), sim)?;
    Ok((report(&result, h, mode)?, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hlf::{build_hlf_net, default_config};
    use std::collections::HashMap;

    /// A hand-made source for checking the arithmetic.
    struct Fixed {
        values: HashMap<RewardQuery, Vec<f64>>,
    }

    impl RewardSource for Fixed {
        fn samples(&self, q: &RewardQuery) -> Option<&[f64]> {
            self.values.get(q).map(Vec::as_slice)
        }
        fn confidence_level(&self) -> f64 {
            0.95
        }
    }

    fn handle() -> HlfNetHandle {
        build_hlf_net(&default_config().with_arrival_rate(10.0)).unwrap()
    }

    fn zeros(h: &HlfNetHandle) -> Fixed {
        let mut values: HashMap<_, _> = required_queries(h)
            .into_iter()
            .map(|q| (q, vec![0.0]))
            .collect();
        for p in ["EP_1", "EP_2", "OP_1", "CP_1", "CP_2"] {
            values.insert(RewardQuery::tokens(p), vec![6.0]);
        }
        Fixed { values }
    }

    #[test]
    fn empty_system() {
        let h = handle();
        let src = zeros(&h);
        let r = report(&src, &h, MrtMode::Effective).unwrap();
        assert_eq!(r.tip.value, 0.0);
        assert_eq!(r.mrt_s.value, 0.0);
        assert_eq!(r.u_end.value, 0.0);
        assert_eq!(r.tp_tps.value, 0.0);
    }

    #[test]
    fn additivity_and_modes() {
        let h = handle();
        let mut src = zeros(&h);
        src.values.insert(RewardQuery::tokens("P_GT"), vec![0.2]);
        src.values
            .insert(RewardQuery::prob(entry_full(&h)), vec![0.5]);
        src.values.insert(RewardQuery::tokens("CP_1"), vec![3.0]);
        src.values.insert(RewardQuery::tokens("CPF_1"), vec![0.8]);
        assert!((transactions_in_progress(&src, &h).unwrap().value - 1.0).abs() < 1e-15);
        let lit = mrt(&src, &h, 10.0, MrtMode::Literal).unwrap().value;
        let eff = mrt(&src, &h, 10.0, MrtMode::Effective).unwrap().value;
        assert!((lit - 0.1).abs() < 1e-15);
        assert!((eff - 0.2).abs() < 1e-15);
        assert!(
            (stage_utilization(&src, &h, Stage::Commit, Some(1))
                .unwrap()
                .value
                - 0.5)
                .abs()
                < 1e-15
        );
        assert!(
            (stage_utilization(&src, &h, Stage::Commit, None)
                .unwrap()
                .value
                - 0.25)
                .abs()
                < 1e-15
        );
        assert!((throughput(&src, &h, Some(1)).unwrap().value - 10.0).abs() < 1e-12);
        assert!((throughput(&src, &h, None).unwrap().value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn missing_queries_are_listed() {
        let h = handle();
        let src = Fixed {
            values: HashMap::new(),
        };
        match transactions_in_progress(&src, &h) {
            Err(MetricsError::Missing(m)) => assert!(m.contains(&"E(P_GT)".to_string())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn full_discard_leaves_mrt_undefined() {
        let h = handle();
        let mut src = zeros(&h);
        src.values
            .insert(RewardQuery::prob(entry_full(&h)), vec![1.0]);
        assert!(matches!(
            mrt(&src, &h, 10.0, MrtMode::Effective),
            Err(MetricsError::UndefinedMrt(_))
        ));
    }

    #[test]
    fn batch_ratio_ci() {
        let h = handle();
        let mut src = zeros(&h);
        for q in src.values.values_mut() {
            let v = q[0];
            *q = vec![v; 4];
        }
        src.values.insert(
            RewardQuery::tokens("FULLBLK_1"),
            vec![0.001, 0.002, 0.003, 0.002],
        );
        let e = block_call_rate(&src, &h).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        assert!(e.ci_halfwidth > 0.0);
    }
}
