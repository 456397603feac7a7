//! Parameter sweeps, factorial experiments and their CSV output.

mod cases;
mod output;
mod spec;

use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use crate::doe::{self, DesignMatrix, DoeError, EffectsTable, Factor, InteractionCell};
use crate::hlf::{build_hlf_net, BuildError, ConfigError, ConfigValue, HlfConfig};
use crate::metrics::{self, MetricReport, MetricsError, MrtMode};
use crate::spn::{solve_ctmc, Estimate, SimConfig};

pub use cases::{case_study, CASE_STUDY_IDS};
pub use output::{write_effects_csv, write_interaction_csv, write_outcome, write_points_csv};
pub use spec::{ExperimentSpec, Method, DEFAULT_MAX_STATES};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("line {line}, column {column}: {message}")]
    Spec {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("point [{point}]: {source}")]
    Config { point: String, source: ConfigError },
    #[error("point [{point}]: {source}")]
    Evaluation { point: String, source: MetricsError },
    #[error(transparent)]
    Doe(#[from] DoeError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<ConfigError> for ExperimentError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Parse {
                line,
                column,
                message,
            } => ExperimentError::Spec {
                line,
                column,
                message,
            },
            other => ExperimentError::Invalid(other.to_string()),
        }
    }
}

/// Metrics that can appear as CSV columns or DoE responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    MrtS,
    Tip,
    DpProb,
    UEnd,
    UOrd,
    UCom,
    TpTps,
    BlockCallRate,
    TimeoutCallRate,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::MrtS,
        Metric::Tip,
        Metric::DpProb,
        Metric::UEnd,
        Metric::UOrd,
        Metric::UCom,
        Metric::TpTps,
        Metric::BlockCallRate,
        Metric::TimeoutCallRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::MrtS => "mrt_s",
            Metric::Tip => "tip",
            Metric::DpProb => "dp_prob",
            Metric::UEnd => "u_end",
            Metric::UOrd => "u_ord",
            Metric::UCom => "u_com",
            Metric::TpTps => "tp_tps",
            Metric::BlockCallRate => "block_call_rate",
            Metric::TimeoutCallRate => "timeout_call_rate",
        }
    }

    pub fn from_name(name: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn of(self, r: &MetricReport) -> Estimate {
        match self {
            Metric::MrtS => r.mrt_s,
            Metric::Tip => r.tip,
            Metric::DpProb => r.dp_prob,
            Metric::UEnd => r.u_end,
            Metric::UOrd => r.u_ord,
            Metric::UCom => r.u_com,
            Metric::TpTps => r.tp_tps,
            Metric::BlockCallRate => r.block_call_rate,
            Metric::TimeoutCallRate => r.timeout_call_rate,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One swept parameter and its values, in sweep order.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(param: impl Into<String>, values: Vec<f64>) -> Self {
        Axis {
            param: param.into(),
            values,
        }
    }

    /// `from, from + step, ...` up to and including `to` (with rounding slack).
    pub fn range(param: impl Into<String>, from: f64, to: f64, step: f64) -> Self {
        let n = ((to - from) / step + 1e-9).floor() as usize + 1;
        Axis::new(param, (0..n).map(|i| from + i as f64 * step).collect())
    }

    /// `points` values evenly spaced in log scale between `from` and `to`.
    pub fn log(param: impl Into<String>, from: f64, to: f64, points: usize) -> Self {
        let (a, b) = (from.log10(), to.log10());
        let values = match points {
            0 => vec![],
            1 => vec![from],
            _ => (0..points)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
                .collect(),
        };
        Axis::new(param, values)
    }
}

/// Parameter assignments for one evaluation.
pub type Point = Vec<(String, f64)>;

fn describe(point: &[(String, f64)]) -> String {
    if point.is_empty() {
        return "base".into();
    }
    point
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Cartesian product of the axes; the last axis varies fastest.
pub fn sweep_points(axes: &[Axis]) -> Vec<Point> {
    let mut points: Vec<Point> = vec![vec![]];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((axis.param.clone(), v));
                    q
                })
            })
            .collect();
    }
    points
}

/// `base` with the point's assignments applied, validated.
pub fn configure(base: &HlfConfig, point: &[(String, f64)]) -> Result<HlfConfig, ExperimentError> {
    let mut cfg = base.clone();
    let err = |source| ExperimentError::Config {
        point: describe(point),
        source,
    };
    for (key, value) in point {
        cfg.set(key, ConfigValue::Number(*value)).map_err(err)?;
    }
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub mode: MrtMode,
    pub method: Method,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            jobs: 0,
            mode: MrtMode::Effective,
            method: Method::Simulation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub point: Point,
    pub report: MetricReport,
    pub seed: u64,
    /// Zero for exact solutions.
    pub simulated_time: f64,
    pub events: u64,
}

/// Build, evaluate and summarize a single point.
pub fn evaluate_point(
    base: &HlfConfig,
    point: &[(String, f64)],
    sim: &SimConfig,
    opts: &RunOptions,
) -> Result<PointResult, ExperimentError> {
    let cfg = configure(base, point)?;
    let fail = |source: MetricsError| ExperimentError::Evaluation {
        point: describe(point),
        source,
    };
    let handle = build_hlf_net(&cfg).map_err(|e| match e {
        BuildError::Config(source) => ExperimentError::Config {
            point: describe(point),
            source,
        },
        other => ExperimentError::Invalid(other.to_string()),
    })?;
    match opts.method {
        Method::Simulation => {
            let (report, res) = metrics::simulate_report(&handle, sim, opts.mode).map_err(fail)?;
            Ok(PointResult {
                point: point.to_vec(),
                report,
                seed: res.seed,
                simulated_time: res.simulated_time,
                events: res.events,
            })
        }
        Method::Exact { max_states } => {
            let queries = metrics::required_queries(&handle);
            let exact =
                solve_ctmc(&handle.net, &queries, max_states).map_err(|e| fail(e.into()))?;
            let report = metrics::report(&exact, &handle, opts.mode).map_err(fail)?;
            Ok(PointResult {
                point: point.to_vec(),
                report,
                seed: sim.seed,
                simulated_time: 0.0,
                events: 0,
            })
        }
    }
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, ExperimentError> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Evaluate every point concurrently; results come back in input order.
/// Every point uses the same seed.
pub fn run_points(
    base: &HlfConfig,
    points: &[Point],
    sim: &SimConfig,
    opts: &RunOptions,
) -> Result<Vec<PointResult>, ExperimentError> {
    for p in points {
        configure(base, p)?;
    }
    in_pool(opts.jobs, || {
        points
            .par_iter()
            .map(|p| evaluate_point(base, p, sim, opts))
            .collect()
    })?
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoeSpec {
    pub factors: Vec<Factor>,
    pub response: Metric,
    /// Seed of the run-order permutation.
    pub order_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionResult {
    pub factor_a: String,
    pub factor_b: String,
    pub cells: [InteractionCell; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoeOutcome {
    pub design: DesignMatrix,
    /// In standard order.
    pub runs: Vec<PointResult>,
    pub responses: Vec<f64>,
    pub effects: EffectsTable,
    /// Every factor pair, in design order.
    pub interactions: Vec<InteractionResult>,
}

/// Simulate every corner of the design (dispatched in randomized order) and
/// estimate effects on the response.
pub fn run_doe(
    base: &HlfConfig,
    spec: &DoeSpec,
    sim: &SimConfig,
    opts: &RunOptions,
) -> Result<DoeOutcome, ExperimentError> {
    let design = doe::randomize_runs(&doe::factorial_design(&spec.factors)?, spec.order_seed);
    let corner = |r: usize| -> Point {
        design
            .levels(r)
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    };
    let dispatched: Vec<Point> = design.run_order.iter().map(|&r| corner(r)).collect();
    let results = run_points(base, &dispatched, sim, opts)?;
    let mut runs: Vec<Option<PointResult>> = vec![None; design.runs.len()];
    for (&r, res) in design.run_order.iter().zip(results) {
        runs[r] = Some(res);
    }
    let runs: Vec<PointResult> = runs
        .into_iter()
        .map(|r| r.expect("run order is a permutation"))
        .collect();
    let responses: Vec<f64> = runs
        .iter()
        .map(|r| spec.response.of(&r.report).value)
        .collect();
    let effects = doe::effects(&design, &responses)?;
    let mut interactions = Vec::new();
    for (i, a) in spec.factors.iter().enumerate() {
        for b in &spec.factors[i + 1..] {
            let cells = doe::interaction_table(&design, &responses, &a.name, &b.name)?;
            interactions.push(InteractionResult {
                factor_a: a.name.clone(),
                factor_b: b.name.clone(),
                cells,
            });
        }
    }
    Ok(DoeOutcome {
        design,
        runs,
        responses,
        effects,
        interactions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutcome {
    Sweep(Vec<PointResult>),
    Doe(DoeOutcome),
}

/// Run a parsed experiment. Command-line overrides belong in `spec` already.
pub fn run(spec: &ExperimentSpec, jobs: usize) -> Result<ExperimentOutcome, ExperimentError> {
    let opts = RunOptions {
        jobs,
        mode: spec.mode,
        method: spec.method,
    };
    match &spec.doe {
        Some(d) => Ok(ExperimentOutcome::Doe(run_doe(
            &spec.base, d, &spec.sim, &opts,
        )?)),
        None => Ok(ExperimentOutcome::Sweep(run_points(
            &spec.base,
            &sweep_points(&spec.sweep),
            &spec.sim,
            &opts,
        )?)),
    }
}
