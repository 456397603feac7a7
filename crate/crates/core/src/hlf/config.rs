use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown configuration key '{0}'")]
    UnknownKey(String),
    #[error("{key}: {message}")]
    Value { key: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ConfigError {
    fn value(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Value {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

/// Parameters of the transaction-flow model. Times are in seconds,
/// capacities in tokens. Per-node vectors are indexed from endorser or
/// committer 1.
#[derive(Debug, Clone, PartialEq)]
pub struct HlfConfig {
    pub n_endorsers: usize,
    pub n_committers: usize,
    /// Mean transaction inter-arrival time (AD). Must be set before building.
    pub arrival_delay: Option<f64>,
    pub block_size: u64,
    pub timeout: f64,
    pub eq: Vec<u64>,
    pub ep: Vec<u64>,
    /// Endorsement service means (te1, te2, ...).
    pub te_endorse: Vec<f64>,
    pub oq_1: u64,
    pub op_1: u64,
    pub te3: f64,
    pub te4: f64,
    pub te5: f64,
    pub te6: f64,
    pub cq: Vec<u64>,
    pub cp: Vec<u64>,
    /// Commit service means (te7, te8, ...).
    pub te_commit: Vec<f64>,
    /// Poisson arrivals instead of a fixed inter-arrival delay.
    pub arrival_exponential: bool,
    /// Exponentially distributed batch timeout instead of a fixed one.
    pub timeout_exponential: bool,
}

pub const DEFAULT_QUEUE: u64 = 100;
pub const DEFAULT_CAPACITY: u64 = 6;

pub fn default_config() -> HlfConfig {
    HlfConfig {
        n_endorsers: 2,
        n_committers: 2,
        arrival_delay: None,
        block_size: 1,
        timeout: 10.0,
        eq: vec![DEFAULT_QUEUE; 2],
        ep: vec![DEFAULT_CAPACITY; 2],
        te_endorse: vec![0.005; 2],
        oq_1: DEFAULT_QUEUE,
        op_1: DEFAULT_CAPACITY,
        te3: 0.005,
        te4: 0.002,
        te5: 0.002,
        te6: 0.01,
        cq: vec![DEFAULT_QUEUE; 2],
        cp: vec![DEFAULT_CAPACITY; 2],
        te_commit: vec![0.08; 2],
        arrival_exponential: false,
        timeout_exponential: false,
    }
}

impl Default for HlfConfig {
    fn default() -> Self {
        default_config()
    }
}

/// A configuration value as written in files and sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfigValue {
    Number(f64),
    Bool(bool),
}

impl fmt::Display for ConfigValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigValue::Number(v) => write!(f, "{v}"),
            ConfigValue::Bool(b) => write!(f, "{b}"),
        }
    }
}

fn node_key(key: &str, prefix: &str) -> Option<usize> {
    let rest = key.strip_prefix(prefix)?.strip_prefix('_')?;
    rest.parse::<usize>().ok().filter(|&i| i >= 1)
}

fn to_count(key: &str, v: ConfigValue) -> Result<u64, ConfigError> {
    match v {
        ConfigValue::Number(x) if x.fract() == 0.0 && (1.0..1e15).contains(&x) => Ok(x as u64),
        ConfigValue::Number(x) => Err(ConfigError::value(
            key,
            format!("expected an integer >= 1, got {x}"),
        )),
        ConfigValue::Bool(_) => Err(ConfigError::value(key, "expected a number")),
    }
}

fn to_time(key: &str, v: ConfigValue) -> Result<f64, ConfigError> {
    match v {
        ConfigValue::Number(x) if x.is_finite() && x > 0.0 => Ok(x),
        ConfigValue::Number(x) => Err(ConfigError::value(
            key,
            format!("expected a positive time, got {x}"),
        )),
        ConfigValue::Bool(_) => Err(ConfigError::value(key, "expected a number")),
    }
}

fn set_node<T: Copy>(key: &str, v: &mut [T], i: usize, x: T) -> Result<(), ConfigError> {
    let len = v.len();
    let slot = v
        .get_mut(i - 1)
        .ok_or_else(|| ConfigError::value(key, format!("node {i} does not exist (only {len})")))?;
    *slot = x;
    Ok(())
}

impl HlfConfig {
    pub fn arrival_rate(&self) -> Option<f64> {
        self.arrival_delay.map(|d| 1.0 / d)
    }

    pub fn with_arrival_rate(mut self, tps: f64) -> Self {
        self.arrival_delay = Some(1.0 / tps);
        self
    }

    /// Fit the per-node vectors to the node counts, padding with defaults.
    pub fn resize(&mut self) {
        fn fit<T: Copy>(v: &mut Vec<T>, n: usize, fill: T) {
            let f = v.first().copied().unwrap_or(fill);
            v.resize(n, f);
        }
        fit(&mut self.eq, self.n_endorsers, DEFAULT_QUEUE);
        fit(&mut self.ep, self.n_endorsers, DEFAULT_CAPACITY);
        fit(&mut self.te_endorse, self.n_endorsers, 0.005);
        fit(&mut self.cq, self.n_committers, DEFAULT_QUEUE);
        fit(&mut self.cp, self.n_committers, DEFAULT_CAPACITY);
        fit(&mut self.te_commit, self.n_committers, 0.08);
    }

    /// Every invariant the net builder relies on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.n_endorsers == 0 || self.n_committers == 0 {
            return bad("at least one endorser and one committer are required".into());
        }
        for (name, len, want) in [
            ("eq", self.eq.len(), self.n_endorsers),
            ("ep", self.ep.len(), self.n_endorsers),
            ("te_endorse", self.te_endorse.len(), self.n_endorsers),
            ("cq", self.cq.len(), self.n_committers),
            ("cp", self.cp.len(), self.n_committers),
            ("te_commit", self.te_commit.len(), self.n_committers),
        ] {
            if len != want {
                return bad(format!("{name} has {len} entries for {want} nodes"));
            }
        }
        if let Some(c) = self
            .eq
            .iter()
            .chain(&self.ep)
            .chain(&self.cq)
            .chain(&self.cp)
            .chain([&self.oq_1, &self.op_1])
            .find(|&&c| c == 0)
        {
            return bad(format!("capacities must be >= 1, got {c}"));
        }
        if self.block_size == 0 {
            return bad("block_size must be >= 1".into());
        }
        let times = self
            .te_endorse
            .iter()
            .chain(&self.te_commit)
            .chain([&self.te3, &self.te4, &self.te5, &self.te6]);
        if let Some(t) = times.into_iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return bad(format!("service times must be positive, got {t}"));
        }
        if !(self.timeout.is_finite() && self.timeout >= 0.0)
            || (self.timeout_exponential && self.timeout == 0.0)
        {
            return bad(format!("invalid timeout {}", self.timeout));
        }
        if let Some(ad) = self.arrival_delay {
            if !(ad.is_finite() && ad > 0.0) {
                return bad(format!("arrival delay must be positive, got {ad}"));
            }
        }
        Ok(())
    }

    /// Set one parameter by its configuration key.
    ///
    /// Per-node keys take a 1-based suffix (`ep_1`, `cq_2`); the bare prefix
    /// (`ep`, `cp`, `cp_n`) sets every node. `te1`/`te2` address endorsers 1
    /// and 2, `te7`/`te8` committers 1 and 2; `te_end_i`/`te_com_i` any node.
    pub fn set(&mut self, key: &str, value: ConfigValue) -> Result<(), ConfigError> {
        let flag = |v: ConfigValue| match v {
            ConfigValue::Bool(b) => Ok(b),
            _ => Err(ConfigError::value(key, "expected true or false")),
        };
        match key {
            "n_endorsers" => {
                self.n_endorsers = to_count(key, value)? as usize;
                self.resize();
            }
            "n_committers" => {
                self.n_committers = to_count(key, value)? as usize;
                self.resize();
            }
            "block_size" => self.block_size = to_count(key, value)?,
            "timeout_s" | "timeout" => match value {
                ConfigValue::Number(x) if x.is_finite() && x >= 0.0 => self.timeout = x,
                _ => {
                    return Err(ConfigError::value(
                        key,
                        format!("expected a time >= 0, got {value}"),
                    ))
                }
            },
            "arrival_delay_s" | "arrival_delay" => self.arrival_delay = Some(to_time(key, value)?),
            "arrival_rate_tps" => self.arrival_delay = Some(1.0 / to_time(key, value)?),
            "arrival_exponential" => self.arrival_exponential = flag(value)?,
            "timeout_exponential" => self.timeout_exponential = flag(value)?,
            "oq_1" | "oq" => self.oq_1 = to_count(key, value)?,
            "op_1" | "op" => self.op_1 = to_count(key, value)?,
            "te1" => set_node(key, &mut self.te_endorse, 1, to_time(key, value)?)?,
            "te2" => set_node(key, &mut self.te_endorse, 2, to_time(key, value)?)?,
            "te3" => self.te3 = to_time(key, value)?,
            "te4" => self.te4 = to_time(key, value)?,
            "te5" => self.te5 = to_time(key, value)?,
            "te6" => self.te6 = to_time(key, value)?,
            "te7" => set_node(key, &mut self.te_commit, 1, to_time(key, value)?)?,
            "te8" => set_node(key, &mut self.te_commit, 2, to_time(key, value)?)?,
            "eq" | "eq_n" => self.eq.fill(to_count(key, value)?),
            "ep" | "ep_n" => self.ep.fill(to_count(key, value)?),
            "cq" | "cq_n" => self.cq.fill(to_count(key, value)?),
            "cp" | "cp_n" => self.cp.fill(to_count(key, value)?),
            "te_end" | "te_end_n" => self.te_endorse.fill(to_time(key, value)?),
            "te_com" | "te_com_n" => self.te_commit.fill(to_time(key, value)?),
            _ => {
                if let Some(i) = node_key(key, "eq") {
                    set_node(key, &mut self.eq, i, to_count(key, value)?)?
                } else if let Some(i) = node_key(key, "ep") {
                    set_node(key, &mut self.ep, i, to_count(key, value)?)?
                } else if let Some(i) = node_key(key, "cq") {
                    set_node(key, &mut self.cq, i, to_count(key, value)?)?
                } else if let Some(i) = node_key(key, "cp") {
                    set_node(key, &mut self.cp, i, to_count(key, value)?)?
                } else if let Some(i) = node_key(key, "te_end") {
                    set_node(key, &mut self.te_endorse, i, to_time(key, value)?)?
                } else if let Some(i) = node_key(key, "te_com") {
                    set_node(key, &mut self.te_commit, i, to_time(key, value)?)?
                } else {
                    return Err(ConfigError::UnknownKey(key.to_string()));
                }
            }
        }
        Ok(())
    }

    /// Numeric value of a configuration key, as accepted by [`HlfConfig::set`].
    pub fn get(&self, key: &str) -> Option<f64> {
        let node = |v: &[u64], i: usize| v.get(i.checked_sub(1)?).map(|&x| x as f64);
        let nodef = |v: &[f64], i: usize| v.get(i.checked_sub(1)?).copied();
        Some(match key {
            "n_endorsers" => self.n_endorsers as f64,
            "n_committers" => self.n_committers as f64,
            "block_size" => self.block_size as f64,
            "timeout_s" | "timeout" => self.timeout,
            "arrival_delay_s" | "arrival_delay" => self.arrival_delay?,
            "arrival_rate_tps" => 1.0 / self.arrival_delay?,
            "oq_1" | "oq" => self.oq_1 as f64,
            "op_1" | "op" => self.op_1 as f64,
            "te1" => nodef(&self.te_endorse, 1)?,
            "te2" => nodef(&self.te_endorse, 2)?,
            "te3" => self.te3,
            "te4" => self.te4,
            "te5" => self.te5,
            "te6" => self.te6,
            "te7" => nodef(&self.te_commit, 1)?,
            "te8" => nodef(&self.te_commit, 2)?,
            "eq" | "eq_n" => node(&self.eq, 1)?,
            "ep" | "ep_n" => node(&self.ep, 1)?,
            "cq" | "cq_n" => node(&self.cq, 1)?,
            "cp" | "cp_n" => node(&self.cp, 1)?,
            "te_end" | "te_end_n" => nodef(&self.te_endorse, 1)?,
            "te_com" | "te_com_n" => nodef(&self.te_commit, 1)?,
            _ => {
                if let Some(i) = node_key(key, "eq") {
                    node(&self.eq, i)?
                } else if let Some(i) = node_key(key, "ep") {
                    node(&self.ep, i)?
                } else if let Some(i) = node_key(key, "cq") {
                    node(&self.cq, i)?
                } else if let Some(i) = node_key(key, "cp") {
                    node(&self.cp, i)?
                } else if let Some(i) = node_key(key, "te_end") {
                    nodef(&self.te_endorse, i)?
                } else {
                    nodef(&self.te_commit, node_key(key, "te_com")?)?
                }
            }
        })
    }

    /// Parse a flat `key = value` TOML document over [`default_config`].
    pub fn from_toml_str(text: &str) -> Result<HlfConfig, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
            ConfigError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        let mut cfg = default_config();
        cfg.apply_table(&table, text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply every entry of a TOML table; node counts go first so per-node
    /// keys address the resized vectors. `source` locates errors.
    pub fn apply_table(&mut self, table: &toml::Table, source: &str) -> Result<(), ConfigError> {
        let mut keys: Vec<&String> = table.keys().collect();
        keys.sort_by_key(|k| !matches!(k.as_str(), "n_endorsers" | "n_committers"));
        for key in keys {
            let value = match &table[key] {
                toml::Value::Integer(i) => ConfigValue::Number(*i as f64),
                toml::Value::Float(f) => ConfigValue::Number(*f),
                toml::Value::Boolean(b) => ConfigValue::Bool(*b),
                other => {
                    return Err(at_key(
                        source,
                        key,
                        format!(
                            "{key}: expected a number or boolean, got {}",
                            other.type_str()
                        ),
                    ))
                }
            };
            self.set(key, value)
                .map_err(|e| at_key(source, key, e.to_string()))?;
        }
        Ok(())
    }
}

pub(crate) fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Position of the first line assigning `key`, for error reporting.
pub(crate) fn at_key(text: &str, key: &str, message: String) -> ConfigError {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                let (line, column) = line_col(text, offset + (line.len() - trimmed.len()));
                return ConfigError::Parse {
                    line,
                    column,
                    message,
                };
            }
        }
        offset += line.len();
    }
    ConfigError::Parse {
        line: 1,
        column: 1,
        message,
    }
}
