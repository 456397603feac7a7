//! Construction of the endorse → order → commit net.

use std::collections::BTreeMap;

use thiserror::Error;

use super::config::{ConfigError, HlfConfig};
use crate::spn::{Cmp, CountExpr, Diagnostic, ParamValue, PetriNet, Predicate, Transition};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("arrival delay is not set (use arrival_delay_s or arrival_rate_tps)")]
    MissingArrival,
}

/// Names of one endorser or committer: a bounded queue feeding a pool of
/// parallel servers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeNames {
    pub queue_capacity: String,
    pub queue_fill: String,
    pub proc_capacity: String,
    pub proc_fill: String,
    /// Immediate moving a token from the queue into service.
    pub start: String,
    /// Timed service transition.
    pub service: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrdererNames {
    pub queue_capacity: String,
    pub queue_fill: String,
    pub proc_capacity: String,
    pub preprocess: String,
    pub accumulator: String,
    pub full_block: String,
    pub partial_block: String,
    pub full_transfer: String,
    pub partial_transfer: String,
    pub block_txs: String,
    pub partial_txs: String,
    pub admit: String,
    pub te3: String,
    pub cut_full: String,
    pub cut_partial: String,
    pub te4: String,
    pub te5: String,
    pub te6: String,
    pub te6_partial: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockNames {
    pub running: String,
    pub expired: String,
    pub reset: String,
    pub timer: String,
}

/// Role → place/transition names of a built net.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameMap {
    pub arrival: String,
    pub entry: String,
    /// Per endorser: immediate routing an arrival into its queue.
    pub route: Vec<String>,
    pub entry_drop: String,
    pub endorsers: Vec<NodeNames>,
    pub orderer: OrdererNames,
    pub clock: ClockNames,
    /// Per committer: place receiving each broadcast transaction.
    pub commit_inbox: Vec<String>,
    pub committers: Vec<NodeNames>,
    /// Per committer: transition discarding a broadcast copy when the queue is full.
    pub commit_drop: Vec<String>,
    pub aliases: BTreeMap<String, String>,
}

impl NameMap {
    /// Canonical name for `name`, following aliases such as `TE1` or `TO_START`.
    pub fn resolve<'a>(&'a self, name: &'a str) -> &'a str {
        self.aliases.get(name).map_or(name, String::as_str)
    }

    /// Endorsement-stage places counted as transactions in progress.
    pub fn endorse_in_progress(&self) -> Vec<String> {
        let mut v = vec![self.entry.clone()];
        for e in &self.endorsers {
            v.push(e.queue_fill.clone());
            v.push(e.proc_fill.clone());
        }
        v
    }

    pub fn order_in_progress(&self) -> Vec<String> {
        let o = &self.orderer;
        [
            &o.queue_fill,
            &o.preprocess,
            &o.accumulator,
            &o.full_block,
            &o.partial_block,
            &o.full_transfer,
            &o.partial_transfer,
            &o.block_txs,
            &o.partial_txs,
        ]
        .into_iter()
        .cloned()
        .collect()
    }

    pub fn commit_in_progress(&self) -> Vec<String> {
        let mut v = self.commit_inbox.clone();
        for c in &self.committers {
            v.push(c.queue_fill.clone());
            v.push(c.proc_fill.clone());
        }
        v
    }

    pub fn in_progress(&self) -> Vec<String> {
        let mut v = self.endorse_in_progress();
        v.extend(self.order_in_progress());
        v.extend(self.commit_in_progress());
        v
    }
}

#[derive(Debug, Clone)]
pub struct HlfNetHandle {
    pub net: PetriNet,
    pub names: NameMap,
    pub config: HlfConfig,
}

fn n(prefix: &str, i: usize) -> String {
    format!("{prefix}_{i}")
}

fn all_zero(places: &[String]) -> Predicate {
    let parts: Vec<Predicate> = places
        .iter()
        .map(|p| Predicate::tokens(p.clone(), Cmp::Eq, 0))
        .collect();
    if parts.len() == 1 {
        parts.into_iter().next().expect("one part")
    } else {
        Predicate::and(parts)
    }
}

pub fn build_hlf_net(cfg: &HlfConfig) -> Result<HlfNetHandle, BuildError> {
    cfg.validate()?;
    let ad = cfg.arrival_delay.ok_or(BuildError::MissingArrival)?;
    let block = CountExpr::Param("BLOCK".into());

    let mut net = PetriNet::new("hlf");
    net.set_param("BLOCK", ParamValue::Int(cfg.block_size as i64));
    net.set_param("TIME_OUT", ParamValue::Real(cfg.timeout));
    net.set_param("AD", ParamValue::Real(ad));

    let endorsers: Vec<NodeNames> = (1..=cfg.n_endorsers)
        .map(|i| NodeNames {
            queue_capacity: n("EQ", i),
            queue_fill: n("EQF", i),
            proc_capacity: n("EP", i),
            proc_fill: n("EPF", i),
            start: n("TI_END", i),
            service: n("TE_END", i),
        })
        .collect();
    let committers: Vec<NodeNames> = (1..=cfg.n_committers)
        .map(|i| NodeNames {
            queue_capacity: n("CQ", i),
            queue_fill: n("CQF", i),
            proc_capacity: n("CP", i),
            proc_fill: n("CPF", i),
            start: n("TI_COM", i),
            service: n("TE_COM", i),
        })
        .collect();
    let o = OrdererNames {
        queue_capacity: "OQ_1".into(),
        queue_fill: "OQF1_1".into(),
        proc_capacity: "OP_1".into(),
        preprocess: "OPF2_1".into(),
        accumulator: "OPF3_1".into(),
        full_block: "FULLBLK_1".into(),
        partial_block: "PARTBLK_1".into(),
        full_transfer: "OPF5_1".into(),
        partial_transfer: "OPF5P_1".into(),
        block_txs: "BLKTX_1".into(),
        partial_txs: "PARTTX_1".into(),
        admit: "TI5".into(),
        te3: "TE3".into(),
        cut_full: "TI6".into(),
        cut_partial: "TI7".into(),
        te4: "TE4".into(),
        te5: "TE5".into(),
        te6: "TE6".into(),
        te6_partial: "TE6P".into(),
    };
    let clock = ClockNames {
        running: "CLK_RUN".into(),
        expired: "CLK_EXP".into(),
        reset: "CLK_RST".into(),
        timer: "T_TIMEOUT".into(),
    };
    let route: Vec<String> = (1..=cfg.n_endorsers).map(|i| n("TI_ROUTE", i)).collect();
    let commit_inbox: Vec<String> = (1..=cfg.n_committers).map(|i| n("CQIN", i)).collect();
    let commit_drop: Vec<String> = (1..=cfg.n_committers).map(|i| n("T_CDROP", i)).collect();

    // Arrival and entry routing.
    net.add_place("P_GT", 0);
    let arrival = if cfg.arrival_exponential {
        Transition::exponential("T_ARRIVAL", ad)
    } else {
        Transition::deterministic("T_ARRIVAL", ad)
    };
    net.add_transition(arrival.single_server().output("P_GT"));
    for (i, e) in endorsers.iter().enumerate() {
        net.add_place(&e.queue_capacity, cfg.eq[i]);
        net.add_place(&e.queue_fill, 0);
        net.add_place(&e.proc_capacity, cfg.ep[i]);
        net.add_place(&e.proc_fill, 0);
        net.add_transition(
            Transition::immediate(&route[i])
                .input("P_GT")
                .input(&e.queue_capacity)
                .output(&e.queue_fill),
        );
    }
    let eq_places: Vec<String> = endorsers.iter().map(|e| e.queue_capacity.clone()).collect();
    net.add_transition(
        Transition::immediate("T_DROP")
            .input("P_GT")
            .guard(all_zero(&eq_places)),
    );

    // Endorsement: a finished endorsement waits for an orderer queue slot.
    net.add_place(&o.queue_capacity, cfg.oq_1);
    net.add_place(&o.queue_fill, 0);
    for (i, e) in endorsers.iter().enumerate() {
        net.add_transition(
            Transition::immediate(&e.start)
                .input(&e.queue_fill)
                .input(&e.proc_capacity)
                .output(&e.proc_fill)
                .output(&e.queue_capacity),
        );
        net.add_transition(
            Transition::exponential(&e.service, cfg.te_endorse[i])
                .input(&e.proc_fill)
                .input(&o.queue_capacity)
                .output(&e.proc_capacity)
                .output(&o.queue_fill),
        );
    }

    // Ordering. OP_1 stays held until the block is transferred.
    for (p, k) in [
        (&o.proc_capacity, cfg.op_1),
        (&o.preprocess, 0),
        (&o.accumulator, 0),
        (&o.full_block, 0),
        (&o.partial_block, 0),
        (&o.full_transfer, 0),
        (&o.partial_transfer, 0),
        (&o.block_txs, 0),
        (&o.partial_txs, 0),
    ] {
        net.add_place(p, k);
    }
    net.add_transition(
        Transition::immediate(&o.admit)
            .input(&o.queue_fill)
            .input(&o.proc_capacity)
            .output(&o.preprocess)
            .output(&o.queue_capacity),
    );
    net.add_transition(
        Transition::exponential(&o.te3, cfg.te3)
            .input(&o.preprocess)
            .output(&o.accumulator),
    );
    net.add_transition(
        Transition::immediate(&o.cut_full)
            .priority(2)
            .guard(Predicate::compare(
                &o.accumulator,
                Cmp::Ge,
                crate::spn::Operand::Param("BLOCK".into()),
            ))
            .input_n(&o.accumulator, block.clone())
            .output(&o.full_block)
            .output_n(&o.block_txs, block.clone()),
    );
    net.add_transition(
        Transition::immediate(&o.cut_partial)
            .guard(Predicate::and([
                Predicate::tokens(&clock.expired, Cmp::Ge, 1),
                Predicate::tokens(&o.accumulator, Cmp::Ge, 1),
                Predicate::tokens(&o.partial_txs, Cmp::Eq, 0),
            ]))
            .input_n(&o.accumulator, CountExpr::FlushAll)
            .output(&o.partial_block)
            .output_n(&o.partial_txs, CountExpr::Flushed(None)),
    );
    net.add_transition(
        Transition::exponential(&o.te4, cfg.te4)
            .input(&o.full_block)
            .output(&o.full_transfer),
    );
    net.add_transition(
        Transition::exponential(&o.te5, cfg.te5)
            .input(&o.partial_block)
            .output(&o.partial_transfer),
    );

    // Clock.
    net.add_place(&clock.running, 1);
    net.add_place(&clock.expired, 0);
    net.add_place(&clock.reset, 0);
    let timer = if cfg.timeout_exponential {
        Transition::exponential(&clock.timer, cfg.timeout)
    } else if cfg.timeout == 0.0 {
        Transition::deterministic(&clock.timer, 0.0).allow_zero_delay()
    } else {
        Transition::deterministic(&clock.timer, cfg.timeout)
    };
    net.add_transition(
        timer
            .single_server()
            .guard(Predicate::tokens(&clock.reset, Cmp::Eq, 0))
            .input(&clock.running)
            .output(&clock.expired),
    );
    net.add_transition(
        Transition::immediate("TI_CLK_RUN")
            .input(&clock.reset)
            .input(&clock.running)
            .output(&clock.running),
    );
    net.add_transition(
        Transition::immediate("TI_CLK_EXP")
            .input(&clock.reset)
            .input(&clock.expired)
            .output(&clock.running),
    );

    // Block transfer: return orderer capacity, broadcast to committers, reset the clock.
    let mut te6 = Transition::exponential(&o.te6, cfg.te6)
        .input(&o.full_transfer)
        .input_n(&o.block_txs, block.clone())
        .output_n(&o.proc_capacity, block.clone())
        .output(&clock.reset);
    let mut te6p = Transition::exponential(&o.te6_partial, cfg.te6)
        .input(&o.partial_transfer)
        .input_n(&o.partial_txs, CountExpr::FlushAll)
        .output_n(&o.proc_capacity, CountExpr::Flushed(None))
        .output(&clock.reset);
    for inbox in &commit_inbox {
        net.add_place(inbox, 0);
        te6 = te6.output_n(inbox, block.clone());
        te6p = te6p.output_n(inbox, CountExpr::Flushed(None));
    }
    net.add_transition(te6);
    net.add_transition(te6p);

    // Commit.
    for (i, c) in committers.iter().enumerate() {
        net.add_place(&c.queue_capacity, cfg.cq[i]);
        net.add_place(&c.queue_fill, 0);
        net.add_place(&c.proc_capacity, cfg.cp[i]);
        net.add_place(&c.proc_fill, 0);
        net.add_transition(
            Transition::immediate(n("TI_CQ", i + 1))
                .input(&commit_inbox[i])
                .input(&c.queue_capacity)
                .output(&c.queue_fill),
        );
        net.add_transition(
            Transition::immediate(&commit_drop[i])
                .input(&commit_inbox[i])
                .guard(Predicate::tokens(&c.queue_capacity, Cmp::Eq, 0)),
        );
        net.add_transition(
            Transition::immediate(&c.start)
                .input(&c.queue_fill)
                .input(&c.proc_capacity)
                .output(&c.proc_fill)
                .output(&c.queue_capacity),
        );
        net.add_transition(
            Transition::exponential(&c.service, cfg.te_commit[i])
                .input(&c.proc_fill)
                .output(&c.proc_capacity),
        );
    }

    let mut aliases = BTreeMap::new();
    for (alias, target) in [
        ("TO_START", clock.running.as_str()),
        ("TO_FINISH", clock.expired.as_str()),
        ("OPF_1_1", o.full_block.as_str()),
        ("OPF_2_1", o.partial_block.as_str()),
    ] {
        aliases.insert(alias.to_string(), target.to_string());
    }
    for (i, e) in endorsers.iter().enumerate().take(2) {
        aliases.insert(format!("TE{}", i + 1), e.service.clone());
        aliases.insert(format!("TI{}", 2 * i + 1), route[i].clone());
        aliases.insert(format!("TI{}", 2 * i + 2), e.start.clone());
    }
    for (i, c) in committers.iter().enumerate().take(2) {
        aliases.insert(format!("TE{}", i + 7), c.service.clone());
    }

    let names = NameMap {
        arrival: "T_ARRIVAL".into(),
        entry: "P_GT".into(),
        route,
        entry_drop: "T_DROP".into(),
        endorsers,
        orderer: o,
        clock,
        commit_inbox,
        committers,
        commit_drop,
        aliases,
    };
    let diags: Vec<Diagnostic> = net.validate();
    assert!(diags.is_empty(), "generated net is invalid: {diags:?}");
    Ok(HlfNetHandle {
        net,
        names,
        config: cfg.clone(),
    })
}
