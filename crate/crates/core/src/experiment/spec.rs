//! Experiment files.
//!
//! ```toml
//! name = "load"
//! mode = "effective"            # or "literal"
//! metrics = ["mrt_s", "tp_tps"] # default: all
//!
//! [base]                        # configuration keys
//! block_size = 1
//!
//! [sim]
//! warmup_s = 100
//! batches = 30
//! batch_s = 100
//! confidence = 0.95
//! seed = 1
//! method = "simulation"         # or "ctmc" with max_states
//!
//! [[sweep]]                     # up to two axes
//! param = "cp"
//! values = [2, 4, 6]
//! [[sweep]]
//! param = "arrival_rate_tps"
//! from = 2.5
//! to = 200
//! step = 15                     # or: log = true, points = 9
//!
//! [output]
//! stem = "load"                 # default: name
//! split_by = "cp"               # one file per value of this axis
//! ```
//!
//! A `[doe]` table (`response`, `order_seed`, `[[doe.factor]]` with `name`,
//! `low`, `high`) replaces `[[sweep]]`.

use toml::{Table, Value};

use super::{configure, Axis, DoeSpec, ExperimentError, Metric};
use crate::doe::{factorial_design, Factor};
use crate::hlf::{default_config, line_col, HlfConfig};
use crate::metrics::MrtMode;
use crate::spn::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Simulation,
    /// Steady-state CTMC solution; every timed transition must be exponential.
    Exact {
        max_states: usize,
    },
}

pub const DEFAULT_MAX_STATES: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub base: HlfConfig,
    pub sweep: Vec<Axis>,
    pub doe: Option<DoeSpec>,
    pub sim: SimConfig,
    pub method: Method,
    pub mode: MrtMode,
    /// CSV metric columns, in order.
    pub metrics: Vec<Metric>,
    /// File name stem for every output.
    pub stem: String,
    /// Sweep axis whose values get one CSV file each.
    pub split_by: Option<String>,
}

impl ExperimentSpec {
    /// A single-point experiment on `base` with default settings.
    pub fn new(name: impl Into<String>, base: HlfConfig) -> Self {
        let name = name.into();
        ExperimentSpec {
            stem: name.clone(),
            name,
            base,
            sweep: vec![],
            doe: None,
            sim: SimConfig::default(),
            method: Method::Simulation,
            mode: MrtMode::Effective,
            metrics: Metric::ALL.to_vec(),
            split_by: None,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Invalid(m));
        if self.sweep.len() > 2 {
            return bad(format!("at most two sweep axes, got {}", self.sweep.len()));
        }
        if self.doe.is_some() && !self.sweep.is_empty() {
            return bad("a sweep and a factorial design cannot be combined".into());
        }
        if self.metrics.is_empty() {
            return bad("no metrics selected".into());
        }
        let swept = |k: &str| {
            self.sweep.iter().any(|a| a.param == k)
                || self
                    .doe
                    .as_ref()
                    .is_some_and(|d| d.factors.iter().any(|f| f.name == k))
        };
        let arrival_keys = ["arrival_rate_tps", "arrival_delay_s", "arrival_delay"];
        if self.base.arrival_delay.is_none() && !arrival_keys.iter().any(|k| swept(k)) {
            return bad("no arrival rate is set or swept".into());
        }
        self.sim
            .validate()
            .map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        for (i, axis) in self.sweep.iter().enumerate() {
            if axis.values.is_empty() {
                return bad(format!("sweep axis '{}' has no values", axis.param));
            }
            if self.sweep[..i].iter().any(|a| a.param == axis.param) {
                return bad(format!("parameter '{}' is swept twice", axis.param));
            }
            for &v in &axis.values {
                configure(&self.base, &[(axis.param.clone(), v)])?;
            }
        }
        if let Some(s) = &self.split_by {
            if !self.sweep.iter().any(|a| &a.param == s) {
                return bad(format!("split_by names '{s}', which is not swept"));
            }
        }
        if let Some(d) = &self.doe {
            factorial_design(&d.factors)?;
            for f in &d.factors {
                configure(&self.base, &[(f.name.clone(), f.low)])?;
                configure(&self.base, &[(f.name.clone(), f.high)])?;
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<ExperimentSpec, ExperimentError> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| {
            let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
            ExperimentError::Spec {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        let p = Parser { text };
        p.known(
            &root,
            &[
                "name", "mode", "metrics", "base", "sim", "sweep", "doe", "output",
            ],
        )?;
        let name = match root.get("name") {
            Some(v) => p.string(v, "name")?.to_string(),
            None => "experiment".to_string(),
        };
        let mut base = default_config();
        if let Some(v) = root.get("base") {
            base.apply_table(p.table(v, "base")?, text)?;
        }
        let mut spec = ExperimentSpec::new(name, base);
        if let Some(v) = root.get("mode") {
            spec.mode = match p.string(v, "mode")? {
                "literal" => MrtMode::Literal,
                "effective" => MrtMode::Effective,
                other => {
                    return Err(p.at(
                        "mode",
                        format!("mode must be literal or effective, got '{other}'"),
                    ))
                }
            };
        }
        if let Some(v) = root.get("metrics") {
            spec.metrics = p
                .array(v, "metrics")?
                .iter()
                .map(|m| {
                    let s = p.string(m, "metrics")?;
                    Metric::from_name(s)
                        .ok_or_else(|| p.at("metrics", format!("unknown metric '{s}'")))
                })
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = root.get("sim") {
            p.sim(p.table(v, "sim")?, &mut spec)?;
        }
        if let Some(v) = root.get("sweep") {
            for axis in p.array(v, "sweep")? {
                spec.sweep.push(p.axis(p.table(axis, "sweep")?)?);
            }
        }
        if let Some(v) = root.get("doe") {
            spec.doe = Some(p.doe(p.table(v, "doe")?)?);
        }
        if let Some(v) = root.get("output") {
            let t = p.table(v, "output")?;
            p.known(t, &["stem", "split_by"])?;
            if let Some(s) = t.get("stem") {
                spec.stem = p.string(s, "stem")?.to_string();
            }
            if let Some(s) = t.get("split_by") {
                spec.split_by = Some(p.string(s, "split_by")?.to_string());
            }
        } else {
            spec.stem = spec.name.clone();
        }
        spec.validate().map_err(|e| match e {
            ExperimentError::Invalid(m) => {
                let key = quoted_key(&m).to_owned();
                p.at(&key, m)
            }
            ExperimentError::Config { point, source } => {
                let key = point.split('=').next().unwrap_or("").to_string();
                p.at(&key, format!("{key}: {source}"))
            }
            other => other,
        })?;
        Ok(spec)
    }
}

/// Best-effort location for semantic errors: the first quoted name in the
/// message, or the start of the file.
fn quoted_key(message: &str) -> &str {
    message.split('\'').nth(1).unwrap_or("")
}

struct Parser<'a> {
    text: &'a str,
}

impl Parser<'_> {
    /// Error positioned at the first line mentioning `key`.
    fn at(&self, key: &str, message: String) -> ExperimentError {
        let mut offset = 0;
        if !key.is_empty() {
            for line in self.text.split_inclusive('\n') {
                let trimmed = line.trim_start();
                let hit = trimmed
                    .strip_prefix(key)
                    .is_some_and(|r| r.trim_start().starts_with('='))
                    || trimmed.contains(&format!("\"{key}\""));
                if hit {
                    let (line, column) = line_col(self.text, offset + (line.len() - trimmed.len()));
                    return ExperimentError::Spec {
                        line,
                        column,
                        message,
                    };
                }
                offset += line.len();
            }
        }
        ExperimentError::Spec {
            line: 1,
            column: 1,
            message,
        }
    }

    fn known(&self, t: &Table, keys: &[&str]) -> Result<(), ExperimentError> {
        match t.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(self.at(k, format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }

    fn table<'v>(&self, v: &'v Value, key: &str) -> Result<&'v Table, ExperimentError> {
        v.as_table()
            .ok_or_else(|| self.at(key, format!("{key}: expected a table")))
    }

    fn array<'v>(&self, v: &'v Value, key: &str) -> Result<&'v [Value], ExperimentError> {
        v.as_array()
            .map(|a| a.as_slice())
            .ok_or_else(|| self.at(key, format!("{key}: expected an array")))
    }

    fn string<'v>(&self, v: &'v Value, key: &str) -> Result<&'v str, ExperimentError> {
        v.as_str()
            .ok_or_else(|| self.at(key, format!("{key}: expected a string")))
    }

    fn number(&self, v: &Value, key: &str) -> Result<f64, ExperimentError> {
        match v {
            Value::Integer(i) => Ok(*i as f64),
            Value::Float(f) => Ok(*f),
            _ => Err(self.at(key, format!("{key}: expected a number"))),
        }
    }

    fn count(&self, v: &Value, key: &str) -> Result<u64, ExperimentError> {
        match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            _ => Err(self.at(key, format!("{key}: expected a non-negative integer"))),
        }
    }

    fn sim(&self, t: &Table, spec: &mut ExperimentSpec) -> Result<(), ExperimentError> {
        self.known(
            t,
            &[
                "warmup_s",
                "batches",
                "batch_s",
                "confidence",
                "seed",
                "max_events",
                "max_immediate_steps",
                "method",
                "max_states",
            ],
        )?;
        let s = &mut spec.sim;
        for (key, v) in t {
            match key.as_str() {
                "warmup_s" => s.warmup_time = self.number(v, key)?,
                "batches" => s.batch_count = self.count(v, key)? as usize,
                "batch_s" => s.batch_length = self.number(v, key)?,
                "confidence" => s.confidence_level = self.number(v, key)?,
                "seed" => s.seed = self.count(v, key)?,
                "max_events" => s.max_events = self.count(v, key)?,
                "max_immediate_steps" => s.max_immediate_steps = self.count(v, key)?,
                _ => {}
            }
        }
        let max_states = match t.get("max_states") {
            Some(v) => self.count(v, "max_states")? as usize,
            None => DEFAULT_MAX_STATES,
        };
        spec.method = match t
            .get("method")
            .map(|v| self.string(v, "method"))
            .transpose()?
        {
            None | Some("simulation") => Method::Simulation,
            Some("ctmc") => Method::Exact { max_states },
            Some(other) => {
                return Err(self.at(
                    "method",
                    format!("method must be simulation or ctmc, got '{other}'"),
                ))
            }
        };
        Ok(())
    }

    fn axis(&self, t: &Table) -> Result<Axis, ExperimentError> {
        self.known(
            t,
            &["param", "values", "from", "to", "step", "log", "points"],
        )?;
        let param = self.string(
            t.get("param")
                .ok_or_else(|| self.at("param", "sweep: missing 'param'".into()))?,
            "param",
        )?;
        if let Some(v) = t.get("values") {
            let values = self
                .array(v, "values")?
                .iter()
                .map(|x| self.number(x, "values"))
                .collect::<Result<_, _>>()?;
            return Ok(Axis::new(param, values));
        }
        let get = |k: &str| -> Result<f64, ExperimentError> {
            let v = t.get(k).ok_or_else(|| {
                self.at(
                    "param",
                    format!("sweep '{param}': needs 'values' or from/to and step or points"),
                )
            })?;
            self.number(v, k)
        };
        let (from, to) = (get("from")?, get("to")?);
        let log = match t.get("log") {
            Some(Value::Boolean(b)) => *b,
            Some(_) => return Err(self.at("log", "log: expected true or false".into())),
            None => false,
        };
        if log {
            let n = self.count(
                t.get("points").ok_or_else(|| {
                    self.at("log", format!("sweep '{param}': log scale needs 'points'"))
                })?,
                "points",
            )?;
            if !(from > 0.0 && to > from) {
                return Err(self.at(
                    "from",
                    format!("sweep '{param}': log scale needs 0 < from < to"),
                ));
            }
            return Ok(Axis::log(param, from, to, n as usize));
        }
        let step = get("step")?;
        if !(step > 0.0 && to >= from) {
            return Err(self.at(
                "step",
                format!("sweep '{param}': needs step > 0 and to >= from"),
            ));
        }
        Ok(Axis::range(param, from, to, step))
    }

    fn doe(&self, t: &Table) -> Result<DoeSpec, ExperimentError> {
        self.known(t, &["response", "order_seed", "factor"])?;
        let response = match t.get("response") {
            Some(v) => {
                let s = self.string(v, "response")?;
                Metric::from_name(s)
                    .ok_or_else(|| self.at("response", format!("unknown metric '{s}'")))?
            }
            None => Metric::MrtS,
        };
        let order_seed = t
            .get("order_seed")
            .map(|v| self.count(v, "order_seed"))
            .transpose()?
            .unwrap_or(1);
        let factors = match t.get("factor") {
            Some(v) => self
                .array(v, "factor")?
                .iter()
                .map(|f| {
                    let f = self.table(f, "factor")?;
                    self.known(f, &["name", "low", "high"])?;
                    let need = |k: &str| {
                        f.get(k)
                            .ok_or_else(|| self.at("factor", format!("factor: missing '{k}'")))
                    };
                    Ok(Factor::new(
                        self.string(need("name")?, "name")?,
                        self.number(need("low")?, "low")?,
                        self.number(need("high")?, "high")?,
                    ))
                })
                .collect::<Result<_, ExperimentError>>()?,
            None => return Err(self.at("doe", "doe: no factors".into())),
        };
        Ok(DoeSpec {
            factors,
            response,
            order_seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"
name = "load"
metrics = ["mrt_s", "u_com"]

[base]
block_size = 1
timeout_s = 10

[sim]
batches = 10
seed = 7

[[sweep]]
param = "cp"
values = [2, 4, 6]

[[sweep]]
param = "arrival_rate_tps"
from = 2.5
to = 200
step = 15

[output]
split_by = "cp"
"#;

    #[test]
    fn parses_a_two_axis_sweep() {
        let s = ExperimentSpec::from_toml_str(SWEEP).unwrap();
        assert_eq!(s.name, "load");
        assert_eq!(s.stem, "load");
        assert_eq!(s.metrics, vec![Metric::MrtS, Metric::UCom]);
        assert_eq!(s.sim.batch_count, 10);
        assert_eq!(s.sim.seed, 7);
        assert_eq!(s.sweep[0].values, vec![2.0, 4.0, 6.0]);
        assert_eq!(s.sweep[1].values.len(), 14);
        assert_eq!(s.split_by.as_deref(), Some("cp"));
        assert_eq!(s.base.timeout, 10.0);
    }

    #[test]
    fn arrival_may_come_from_the_sweep() {
        let text = "[[sweep]]\nparam = \"arrival_rate_tps\"\nvalues = [10]\n";
        assert!(ExperimentSpec::from_toml_str(text).is_ok());
        assert!(ExperimentSpec::from_toml_str("[base]\nblock_size = 2\n").is_err());
        let text =
            "[base]\narrival_rate_tps = 5\n[[sweep]]\nparam = \"block_size\"\nvalues = [1, 2]\n";
        assert_eq!(ExperimentSpec::from_toml_str(text).unwrap().sweep.len(), 1);
    }

    #[test]
    fn doe_section() {
        let text = r#"
[base]
arrival_rate_tps = 10
[doe]
response = "mrt_s"
[[doe.factor]]
name = "block_size"
low = 2
high = 10
[[doe.factor]]
name = "timeout_s"
low = 0.01
high = 100
"#;
        let s = ExperimentSpec::from_toml_str(text).unwrap();
        let d = s.doe.unwrap();
        assert_eq!(d.factors.len(), 2);
        assert_eq!(d.factors[1], Factor::new("timeout_s", 0.01, 100.0));
    }

    fn position(text: &str) -> (usize, usize) {
        match ExperimentSpec::from_toml_str(text) {
            Err(ExperimentError::Spec { line, column, .. }) => (line, column),
            other => panic!("expected a positioned error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            position("[base]\narrival_rate_tps = 10\nblock_size = = 3\n").0,
            3
        );
        assert_eq!(
            position("[base]\narrival_rate_tps = 10\n  bogus = 1\n"),
            (3, 3)
        );
        assert_eq!(
            position("[base]\narrival_rate_tps = 10\n[sim]\nbatches = \"x\"\n").0,
            4
        );
        let text = "[base]\narrival_rate_tps = 10\n[[sweep]]\nparam = \"cp\"\nvalues = [2.5]\n";
        assert_eq!(position(text).0, 4);
        let text = "mode = \"fast\"\n[base]\narrival_rate_tps = 10\n";
        assert_eq!(position(text), (1, 1));
    }

    #[test]
    fn sweep_and_doe_are_exclusive() {
        let text = "[base]\narrival_rate_tps = 10\n[[sweep]]\nparam = \"cp\"\nvalues = [2]\n[doe]\n[[doe.factor]]\nname = \"cp\"\nlow = 2\nhigh = 6\n";
        assert!(ExperimentSpec::from_toml_str(text).is_err());
    }
}
