//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use hlf_spn::doe::{effects, factorial_design, Factor};
use hlf_spn::experiment::{
    self, case_study, evaluate_point, ExperimentOutcome, PointResult, RunOptions,
};
use hlf_spn::hlf::{build_hlf_net, default_config, HlfConfig, HlfNetHandle};
use hlf_spn::metrics::{self, MrtMode, Stage};
use hlf_spn::spn::{
    simulate_observed, simulate_stationary, solve_ctmc, Cmp, CompiledNet, CountExpr, Marking,
    PetriNet, Predicate, RewardQuery, SimConfig, SimObserver, Transition, TransitionId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// ---------------------------------------------------------------- M/M/c/K

struct Mmck {
    mean_in_system: f64,
    blocking: f64,
    utilization: f64,
    throughput: f64,
}

fn mmck(lambda: f64, mu: f64, c: u64, k: u64) -> Mmck {
    let a = lambda / mu;
    let mut w = vec![1.0f64];
    for n in 1..=k {
        let servers = n.min(c) as f64;
        w.push(w[n as usize - 1] * a / servers);
    }
    let z: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / z).collect();
    let blocking = p[k as usize];
    let throughput = lambda * (1.0 - blocking);
    Mmck {
        mean_in_system: p.iter().enumerate().map(|(n, pn)| n as f64 * pn).sum(),
        blocking,
        utilization: throughput / (c as f64 * mu),
        throughput,
    }
}

/// One endorser with `c` slots and room for `k` transactions; ordering and
/// commit made negligible.
fn degenerate(lambda: f64, mu: f64, c: u64, k: u64) -> HlfConfig {
    let mut cfg = HlfConfig {
        n_endorsers: 1,
        n_committers: 1,
        block_size: 1,
        arrival_exponential: true,
        ..default_config()
    };
    cfg.resize();
    cfg.eq = vec![k - c];
    cfg.ep = vec![c];
    cfg.te_endorse = vec![1.0 / mu];
    (cfg.oq_1, cfg.op_1) = (1000, 1000);
    (cfg.te3, cfg.te4, cfg.te5, cfg.te6) = (1e-5, 1e-5, 1e-5, 1e-5);
    cfg.cq = vec![1000];
    cfg.cp = vec![1000];
    cfg.te_commit = vec![1e-5];
    cfg.with_arrival_rate(lambda)
}

fn criterion_1() -> Verdict {
    let cases = [
        (150.0, 200.0, 1u64, 5u64),
        (500.0, 200.0, 3, 10),
        (1300.0, 200.0, 6, 12),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (lambda, mu, c, k) in cases {
        let start = Instant::now();
        let exact = mmck(lambda, mu, c, k);
        let cfg = degenerate(lambda, mu, c, k);
        let h = build_hlf_net(&cfg).expect("degenerate config builds");
        let horizon = 1.5e7 / (lambda * 12.0);
        let sim = SimConfig {
            warmup_time: 20.0,
            batch_count: 30,
            batch_length: horizon / 30.0,
            ..SimConfig::default()
        };
        let (r, res) = metrics::simulate_report(&h, &sim, MrtMode::Effective).expect("simulation");
        let l = metrics::stage_in_progress(&res, &h, Stage::Endorse).expect("stage");
        let checks = [
            ("L", l, exact.mean_in_system),
            ("P_K", r.dp_prob, exact.blocking),
            ("U", r.u_end, exact.utilization),
            ("X", r.tp_tps, exact.throughput),
        ];
        let secs = start.elapsed().as_secs_f64();
        let mut case_ok = res.events >= 1_000_000 && secs < 30.0;
        let mut parts = Vec::new();
        for (name, est, want) in checks {
            let rel = (est.value - want).abs() / want.abs().max(1e-12);
            let ok = est.covers(want, 0.0) && rel <= 0.02;
            case_ok &= ok;
            parts.push(format!(
                "{name} {:.4}±{:.4} vs {want:.4}{}",
                est.value,
                est.ci_halfwidth,
                if ok { "" } else { " (miss)" }
            ));
        }
        pass &= case_ok;
        notes.push(format!(
            "c={c} K={k}: {} [{} events, {secs:.1}s]",
            parts.join(", "),
            res.events
        ));
    }
    verdict(pass, notes.join("; "))
}

// ---------------------------------------------------------------- cross-evaluator

fn queue_nets() -> Vec<(PetriNet, Vec<RewardQuery>)> {
    let mut nets = Vec::new();

    let mut n = PetriNet::new("mm1k");
    n.add_place("FREE", 8);
    n.add_place("Q", 0);
    n.add_transition(
        Transition::exponential("ARR", 1.0 / 0.9)
            .single_server()
            .input("FREE")
            .output("Q"),
    );
    n.add_transition(
        Transition::exponential("SRV", 1.0)
            .single_server()
            .input("Q")
            .output("FREE"),
    );
    nets.push((
        n,
        vec![
            RewardQuery::tokens("Q"),
            RewardQuery::rate("SRV"),
            RewardQuery::prob(Predicate::tokens("FREE", Cmp::Eq, 0)),
        ],
    ));

    let mut n = PetriNet::new("mmck");
    n.add_place("FREE", 10);
    n.add_place("Q", 0);
    n.add_place("SRV", 3);
    n.add_place("BUSY", 0);
    n.add_transition(
        Transition::exponential("ARR", 1.0 / 2.5)
            .single_server()
            .input("FREE")
            .output("Q"),
    );
    n.add_transition(
        Transition::immediate("START")
            .input("Q")
            .input("SRV")
            .output("BUSY"),
    );
    n.add_transition(
        Transition::exponential("DONE", 1.0)
            .input("BUSY")
            .output("SRV")
            .output("FREE"),
    );
    nets.push((
        n,
        vec![
            RewardQuery::tokens("Q"),
            RewardQuery::tokens("BUSY"),
            RewardQuery::rate("DONE"),
        ],
    ));

    // tandem with blocking before service
    let mut n = PetriNet::new("tandem");
    n.add_place("SRC", 1);
    n.add_place("B1", 0);
    n.add_place("F1", 4);
    n.add_place("B2", 0);
    n.add_place("F2", 3);
    n.add_transition(
        Transition::exponential("ARR", 1.0 / 0.8)
            .single_server()
            .input("SRC")
            .input("F1")
            .output("SRC")
            .output("B1"),
    );
    n.add_transition(
        Transition::exponential("S1", 1.0)
            .single_server()
            .input("B1")
            .input("F2")
            .output("F1")
            .output("B2"),
    );
    n.add_transition(
        Transition::exponential("S2", 1.0 / 1.2)
            .single_server()
            .input("B2")
            .output("F2"),
    );
    nets.push((
        n,
        vec![
            RewardQuery::tokens("B1"),
            RewardQuery::tokens("B2"),
            RewardQuery::rate("S2"),
            RewardQuery::prob(Predicate::tokens("F2", Cmp::Eq, 0)),
        ],
    ));

    // closed network with weighted and prioritized routing
    let mut n = PetriNet::new("closed");
    n.add_place("THINK", 6);
    n.add_place("CHOOSE", 0);
    n.add_place("CPU", 0);
    n.add_place("DISK", 0);
    n.add_place("URGENT", 0);
    n.add_transition(
        Transition::exponential("SUBMIT", 2.0)
            .input("THINK")
            .output("CHOOSE"),
    );
    n.add_transition(
        Transition::immediate("TO_CPU")
            .weight(3.0)
            .input("CHOOSE")
            .output("CPU"),
    );
    n.add_transition(
        Transition::immediate("TO_DISK")
            .weight(1.0)
            .input("CHOOSE")
            .output("DISK"),
    );
    n.add_transition(
        Transition::immediate("TO_URGENT")
            .priority(2)
            .guard(Predicate::tokens("CPU", Cmp::Ge, 3))
            .input("CHOOSE")
            .output("URGENT"),
    );
    n.add_transition(
        Transition::exponential("CPU_DONE", 0.4)
            .single_server()
            .input("CPU")
            .output("THINK"),
    );
    n.add_transition(
        Transition::exponential("DISK_DONE", 0.7)
            .single_server()
            .input("DISK")
            .output("THINK"),
    );
    n.add_transition(
        Transition::exponential("URGENT_DONE", 0.2)
            .input("URGENT")
            .output("THINK"),
    );
    nets.push((
        n,
        vec![
            RewardQuery::tokens("CPU"),
            RewardQuery::tokens("DISK"),
            RewardQuery::tokens("URGENT"),
            RewardQuery::rate("SUBMIT"),
            RewardQuery::rate("TO_URGENT"),
        ],
    ));

    // batch service through a flush arc
    let mut n = PetriNet::new("batch");
    n.add_place("FREE", 6);
    n.add_place("BUF", 0);
    n.add_place("OUT", 0);
    n.add_transition(
        Transition::exponential("ARR", 1.0 / 3.0)
            .single_server()
            .input("FREE")
            .output("BUF"),
    );
    n.add_transition(
        Transition::exponential("CUT", 1.0)
            .single_server()
            .guard(Predicate::tokens("BUF", Cmp::Ge, 2))
            .input_n("BUF", CountExpr::FlushAll)
            .output_n("OUT", CountExpr::Flushed(None)),
    );
    n.add_transition(
        Transition::exponential("EMIT", 1.0 / 4.0)
            .input("OUT")
            .output("FREE"),
    );
    nets.push((
        n,
        vec![
            RewardQuery::tokens("BUF"),
            RewardQuery::tokens("OUT"),
            RewardQuery::rate("CUT"),
            RewardQuery::rate("EMIT"),
        ],
    ));

    nets
}

/// The transaction-flow net itself, Markovian and with small capacities.
fn small_hlf() -> HlfNetHandle {
    let mut cfg = HlfConfig {
        n_endorsers: 2,
        n_committers: 1,
        block_size: 2,
        timeout: 0.05,
        arrival_exponential: true,
        timeout_exponential: true,
        ..default_config()
    };
    cfg.resize();
    cfg.eq = vec![1, 1];
    cfg.ep = vec![1, 1];
    cfg.te_endorse = vec![0.02, 0.03];
    (cfg.oq_1, cfg.op_1) = (2, 2);
    cfg.cq = vec![2];
    cfg.cp = vec![1];
    cfg.te_commit = vec![0.02];
    build_hlf_net(&cfg.with_arrival_rate(40.0)).expect("small config builds")
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut nets = queue_nets();
    let h = small_hlf();
    let hq = metrics::required_queries(&h);
    nets.push((h.net.clone(), hq));
    let (mut inside, mut total) = (0usize, 0usize);
    let mut notes = Vec::new();
    for (net, queries) in &nets {
        let exact = match solve_ctmc(net, queries, 50_000) {
            Ok(e) => e,
            Err(e) => {
                notes.push(format!("{}: exact solution failed ({e})", net.name));
                total += queries.len();
                continue;
            }
        };
        let sim = SimConfig {
            warmup_time: 200.0,
            batch_count: 30,
            batch_length: 400.0,
            seed: 11,
            ..SimConfig::default()
        };
        let sim = if net.name == h.net.name {
            SimConfig {
                warmup_time: 20.0,
                batch_length: 100.0,
                ..sim
            }
        } else {
            sim
        };
        let res = simulate_stationary(net, queries, &sim).expect("simulation");
        let mut hits = 0;
        for (q, want) in queries.iter().zip(&exact.values) {
            let est = res.estimate(q).expect("query simulated");
            if est.covers(*want, 1e-12) {
                hits += 1;
            }
        }
        inside += hits;
        total += queries.len();
        notes.push(format!(
            "{} {hits}/{} ({} states)",
            net.name,
            queries.len(),
            exact.markings.len()
        ));
    }
    let frac = inside as f64 / total as f64;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        nets.len() >= 5 && frac >= 0.9 && secs < 120.0,
        format!(
            "{inside}/{total} inside ({:.0}%), {secs:.1}s: {}",
            frac * 100.0,
            notes.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- case studies

fn reduced(mut s: experiment::ExperimentSpec) -> experiment::ExperimentSpec {
    s.sim.batch_count = 10;
    s
}

fn sweep(s: &experiment::ExperimentSpec) -> Vec<PointResult> {
    match experiment::run(s, 0).expect("case study runs") {
        ExperimentOutcome::Sweep(rows) => rows,
        ExperimentOutcome::Doe(_) => unreachable!("sweep expected"),
    }
}

fn param(r: &PointResult, name: &str) -> f64 {
    r.point
        .iter()
        .find(|(k, _)| k == name)
        .map(|(_, v)| *v)
        .expect("swept parameter")
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let rows = sweep(&reduced(case_study(1).unwrap().remove(0)));
    let mut pass = true;
    let mut notes = Vec::new();
    for cp in [2.0, 4.0, 6.0] {
        let curve: Vec<&PointResult> = rows.iter().filter(|r| param(r, "cp") == cp).collect();
        let plateau = cp / 0.08;
        let tp_max = curve
            .iter()
            .map(|r| r.report.tp_tps.value)
            .fold(0.0, f64::max);
        let ok_tp = (tp_max - plateau).abs() <= 0.1 * plateau;
        pass &= ok_tp;
        let mut note = format!("cp={cp}: plateau {tp_max:.1} tps vs {plateau:.0}");
        if cp == 6.0 {
            let at = curve
                .iter()
                .find(|r| param(r, "arrival_rate_tps") >= 75.0)
                .expect("grid reaches 75 tps");
            let u = at.report.u_com.value;
            pass &= u >= 0.95;
            note += &format!(", u_com {u:.3} at {} tps", param(at, "arrival_rate_tps"));
        }
        notes.push(note);
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 300.0;
    verdict(pass, format!("{} [{secs:.1}s]", notes.join("; ")))
}

struct Counter {
    target: usize,
    fired: u64,
}

impl SimObserver for Counter {
    fn on_fire(&mut self, _time: f64, t: usize, _tokens: &[u64]) {
        if t == self.target {
            self.fired += 1;
        }
    }
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let block_spec = reduced(case_study(2).unwrap().remove(0));
    let rows = sweep(&block_spec);
    let at = |b: f64| {
        rows.iter()
            .find(|r| param(r, "block_size") == b)
            .expect("block in grid")
    };
    let tp_ok = rows
        .iter()
        .filter(|r| param(r, "block_size") <= 6.0)
        .all(|r| (r.report.tp_tps.value - 70.0).abs() <= 7.0);
    let tp_range = rows
        .iter()
        .filter(|r| param(r, "block_size") <= 6.0)
        .map(|r| r.report.tp_tps.value)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let (m6, m7) = (at(6.0).report.mrt_s.value, at(7.0).report.mrt_s.value);
    let ratio = m7 / m6;
    let literal = RunOptions {
        mode: MrtMode::Literal,
        ..RunOptions::default()
    };
    let lit = |b: f64| {
        evaluate_point(
            &block_spec.base,
            &[("block_size".into(), b)],
            &block_spec.sim,
            &literal,
        )
        .expect("literal mode")
        .report
        .mrt_s
        .value
    };
    let (l6, l7) = (lit(6.0), lit(7.0));
    let dp_max = rows
        .iter()
        .map(|r| r.report.dp_prob.value)
        .fold(0.0, f64::max);

    let cfg = HlfConfig {
        block_size: 7,
        ..block_spec.base.clone()
    };
    let h = build_hlf_net(&cfg).expect("block 7 builds");
    let ti6 = h
        .net
        .transition_id(&h.names.orderer.cut_full)
        .expect("TI6 exists")
        .0;
    let sim = SimConfig {
        warmup_time: 0.0,
        batch_count: 10,
        batch_length: 100.0,
        ..SimConfig::default()
    };
    let mut counter = Counter {
        target: ti6,
        fired: 0,
    };
    simulate_observed(&h.net, &[], &sim, &mut counter).expect("simulation");
    let structural = h.config.op_1 < h.config.block_size;

    let pass = tp_ok && ratio >= 5.0 && dp_max >= 0.6 && counter.fired == 0 && structural;
    verdict(
        pass,
        format!(
            "TP(B<=6) in [{:.1}, {:.1}] tps; MRT {m6:.2}s -> {m7:.1}s (x{ratio:.0}, literal {l6:.2}s -> {l7:.2}s); max DP {dp_max:.3}; TI6 firings at B=7: {} [{:.1}s]",
            tp_range.0,
            tp_range.1,
            counter.fired,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let rows = sweep(&reduced(case_study(3).unwrap().remove(0)));
    let rate = |r: &PointResult| (r.report.block_call_rate, r.report.timeout_call_rate);
    let mut mono = true;
    for w in rows.windows(2) {
        let ((b0, t0), (b1, t1)) = (rate(&w[0]), rate(&w[1]));
        mono &= b1.value >= b0.value - (b0.ci_halfwidth + b1.ci_halfwidth);
        mono &= t1.value <= t0.value + (t0.ci_halfwidth + t1.ci_halfwidth);
    }
    let diff: Vec<f64> = rows
        .iter()
        .map(|r| r.report.block_call_rate.value - r.report.timeout_call_rate.value)
        .collect();
    let cross = diff.windows(2).position(|w| w[0] < 0.0 && w[1] > 0.0);
    let (first, last) = (rate(&rows[0]), rate(rows.last().unwrap()));
    let pass =
        mono && cross.is_some() && first.1.value > first.0.value && last.0.value > last.1.value;
    let cross_txt = cross.map_or("none".to_string(), |i| {
        format!(
            "between {} and {} s",
            param(&rows[i], "timeout_s"),
            param(&rows[i + 1], "timeout_s")
        )
    });
    verdict(
        pass,
        format!(
            "monotone {mono}; crossing {cross_txt}; T=0: block {:.2}/s timeout {:.2}/s; T=2: block {:.2}/s timeout {:.2}/s [{:.1}s]",
            first.0.value,
            first.1.value,
            last.0.value,
            last.1.value,
            start.elapsed().as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- DoE

const TABLE_1: [[i8; 7]; 8] = [
    [-1, -1, -1, 1, 1, 1, -1],
    [-1, -1, 1, 1, -1, -1, 1],
    [-1, 1, -1, -1, 1, -1, 1],
    [-1, 1, 1, -1, -1, 1, -1],
    [1, -1, -1, -1, -1, 1, 1],
    [1, -1, 1, -1, 1, -1, -1],
    [1, 1, -1, 1, -1, -1, -1],
    [1, 1, 1, 1, 1, 1, 1],
];

fn doe_ranking(spec: &experiment::ExperimentSpec) -> Vec<(String, f64)> {
    match experiment::run(spec, 0).expect("design runs") {
        ExperimentOutcome::Doe(d) => d
            .effects
            .ranking()
            .iter()
            .map(|e| (e.term.clone(), e.effect))
            .collect(),
        ExperimentOutcome::Sweep(_) => unreachable!("design expected"),
    }
}

fn criterion_6() -> (Verdict, String) {
    let start = Instant::now();
    let factors = [
        Factor::new("x1", -1.0, 1.0),
        Factor::new("x2", -1.0, 1.0),
        Factor::new("x3", -1.0, 1.0),
    ];
    let d = factorial_design(&factors).expect("k = 3");
    let labels = ["x1", "x2", "x3", "x1:x2", "x1:x3", "x2:x3", "x1:x2:x3"];
    let table_ok = labels.iter().enumerate().all(|(j, l)| {
        let col = d.column(l).expect("column exists");
        (0..8).all(|r| col.signs[r] == TABLE_1[r][j])
    });

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let big: Vec<Factor> = (0..6)
        .map(|i| Factor::new(format!("f{i}"), 0.0, 1.0))
        .collect();
    let design = factorial_design(&big).expect("k = 6");
    let coef: HashMap<String, f64> = design
        .columns
        .iter()
        .map(|c| (c.label.clone(), rng.random_range(-5.0..5.0)))
        .collect();
    let y: Vec<f64> = (0..design.runs.len())
        .map(|r| {
            3.0 + design
                .columns
                .iter()
                .map(|c| coef[&c.label] * c.signs[r] as f64)
                .sum::<f64>()
        })
        .collect();
    let eff = effects(&design, &y).expect("effects");
    let worst = eff
        .effects
        .iter()
        .map(|e| (e.effect - 2.0 * coef[&e.term]).abs())
        .fold(0.0, f64::max);
    let exact_ok = worst <= 1e-12;

    let cs4 = reduced(case_study(4).unwrap().remove(0));
    let ranking = doe_ranking(&cs4);
    let first = &ranking[0];
    let secs = start.elapsed().as_secs_f64();
    let pass = table_ok && exact_ok && first.0 == "timeout_s" && secs < 600.0;
    let top: Vec<String> = ranking
        .iter()
        .take(3)
        .map(|(t, e)| format!("{t} {e:.3}"))
        .collect();
    let v = verdict(pass, format!("Table 1 match {table_ok}; max linear error {worst:.1e}; top effects on MRT: {} [{secs:.1}s]", top.join(", ")));

    let mut alt = cs4;
    let f = &mut alt.doe.as_mut().unwrap().factors;
    f[0].low = 1.0;
    f[1].low = 0.1;
    let alt_top: Vec<String> = doe_ranking(&alt)
        .iter()
        .take(3)
        .map(|(t, e)| format!("{t} {e:.3}"))
        .collect();
    (
        v,
        format!(
            "BLOCK {{1,10}}, TIME_OUT {{0.1,100}}: {}",
            alt_top.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- invariants

struct Invariants {
    compiled: CompiledNet,
    prev: Vec<u64>,
    pairs: Vec<(usize, usize, u64)>,
    ordering: (Vec<usize>, u64),
    clock: (usize, usize),
    events: u64,
    violations: Vec<String>,
}

impl Invariants {
    fn new(h: &HlfNetHandle) -> Self {
        let compiled = h.net.compile().expect("net compiles");
        let idx = |n: &str| {
            compiled
                .place_index(n)
                .unwrap_or_else(|| panic!("place {n}"))
        };
        let mut pairs = Vec::new();
        for (i, e) in h.names.endorsers.iter().enumerate() {
            pairs.push((idx(&e.queue_capacity), idx(&e.queue_fill), h.config.eq[i]));
            pairs.push((idx(&e.proc_capacity), idx(&e.proc_fill), h.config.ep[i]));
        }
        for (i, c) in h.names.committers.iter().enumerate() {
            pairs.push((idx(&c.queue_capacity), idx(&c.queue_fill), h.config.cq[i]));
            pairs.push((idx(&c.proc_capacity), idx(&c.proc_fill), h.config.cp[i]));
        }
        let o = &h.names.orderer;
        pairs.push((idx(&o.queue_capacity), idx(&o.queue_fill), h.config.oq_1));
        let ordering = (
            [
                &o.proc_capacity,
                &o.preprocess,
                &o.accumulator,
                &o.block_txs,
                &o.partial_txs,
            ]
            .map(|p| idx(p))
            .to_vec(),
            h.config.op_1,
        );
        let clock = (idx(&h.names.clock.running), idx(&h.names.clock.expired));
        let prev = compiled.initial_marking().0;
        Invariants {
            compiled,
            prev,
            pairs,
            ordering,
            clock,
            events: 0,
            violations: Vec::new(),
        }
    }

    fn check(&mut self, tokens: &[u64]) {
        if self.violations.len() >= 5 {
            return;
        }
        for &(a, b, cap) in &self.pairs {
            if tokens[a] + tokens[b] != cap {
                self.violations.push(format!(
                    "capacity {} + {} != {cap}",
                    self.compiled.place_name(a),
                    self.compiled.place_name(b)
                ));
            }
        }
        let held: u64 = self.ordering.0.iter().map(|&p| tokens[p]).sum();
        if held != self.ordering.1 {
            self.violations
                .push(format!("ordering capacity {held} != {}", self.ordering.1));
        }
        if tokens[self.clock.0] + tokens[self.clock.1] != 1 {
            self.violations.push("clock token not unique".into());
        }
        // counts are unsigned; a wrap-around would show up as a huge value
        if let Some(p) = tokens.iter().position(|&x| x > 1 << 40) {
            self.violations
                .push(format!("negative count in {}", self.compiled.place_name(p)));
        }
    }
}

impl SimObserver for Invariants {
    fn on_fire(&mut self, _time: f64, t: usize, tokens: &[u64]) {
        self.events += 1;
        let before = Marking(std::mem::replace(&mut self.prev, tokens.to_vec()));
        let enabled = self
            .compiled
            .enabled_set(&before)
            .expect("marking dimension");
        let timed = !self.compiled.kind(TransitionId(t)).is_immediate();
        let sound = enabled.iter().any(|(id, _)| id.0 == t)
            && (!timed || self.compiled.is_tangible(&before));
        if !sound && self.violations.len() < 5 {
            self.violations.push(format!(
                "{} fired while not enabled",
                self.compiled.transition_name(TransitionId(t))
            ));
        }
        self.check(tokens);
    }

    fn on_tangible(&mut self, _time: f64, tokens: &[u64]) {
        self.check(tokens);
    }
}

fn criterion_7() -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for lambda in [10.0, 75.0, 150.0] {
        let h = build_hlf_net(&default_config().with_arrival_rate(lambda)).expect("default builds");
        let horizon = 1.2e5 / lambda;
        let sim = SimConfig {
            warmup_time: 0.0,
            batch_count: 10,
            batch_length: horizon / 10.0,
            ..SimConfig::default()
        };
        let mut inv = Invariants::new(&h);
        simulate_observed(&h.net, &[], &sim, &mut inv).expect("simulation");
        let ok = inv.violations.is_empty() && inv.events >= 1_000_000;
        pass &= ok;
        notes.push(format!(
            "{lambda} tps: {} events, {}",
            inv.events,
            if inv.violations.is_empty() {
                "clean".to_string()
            } else {
                inv.violations.join("; ")
            }
        ));
    }
    verdict(pass, notes.join(", "))
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut all = true;
    let mut line = |id: u8, name: &str, v: Verdict| {
        all &= v.pass;
        println!(
            "criterion {id} {}: {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    };
    line(1, "M/M/c/K reductions", criterion_1());
    line(2, "cross-evaluator agreement", criterion_2());
    line(3, "commit capacity sweep", criterion_3());
    line(4, "block size sweep", criterion_4());
    line(5, "timeout against block cuts", criterion_5());
    let (v6, info) = criterion_6();
    line(6, "factorial design", v6);
    println!("info: DoE ranking with the alternative levels {info}");
    line(7, "invariants", criterion_7());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
