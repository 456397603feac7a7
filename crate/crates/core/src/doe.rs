//! Two-level full factorial designs and effect estimation.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const MAX_FACTORS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DoeError {
    #[error("a design needs 1 to {MAX_FACTORS} factors, got {0}")]
    FactorCount(usize),
    #[error("duplicate factor '{0}'")]
    Duplicate(String),
    #[error("factor '{0}' has equal low and high levels")]
    EqualLevels(String),
    #[error("expected {expected} responses, got {got}")]
    Length { expected: usize, got: usize },
    #[error("unknown factor '{0}'")]
    UnknownFactor(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

impl Factor {
    pub fn new(name: impl Into<String>, low: f64, high: f64) -> Self {
        Factor {
            name: name.into(),
            low,
            high,
        }
    }

    pub fn level(&self, sign: i8) -> f64 {
        if sign < 0 {
            self.low
        } else {
            self.high
        }
    }
}

/// A sign column: a main effect (one factor) or an interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    /// Indices of the factors multiplied together.
    pub factors: Vec<usize>,
    pub label: String,
    pub signs: Vec<i8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub factors: Vec<Factor>,
    /// `runs[r][f]` is the sign of factor `f` in run `r` (standard order).
    pub runs: Vec<Vec<i8>>,
    /// Main columns first, then interactions by order and position.
    pub columns: Vec<Column>,
    /// Execution order as indices into `runs`.
    pub run_order: Vec<usize>,
}

impl DesignMatrix {
    pub fn k(&self) -> usize {
        self.factors.len()
    }

    pub fn column(&self, label: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.label == label)
    }

    /// Factor levels of run `r`.
    pub fn levels(&self, r: usize) -> Vec<(&str, f64)> {
        self.factors
            .iter()
            .zip(&self.runs[r])
            .map(|(f, &s)| (f.name.as_str(), f.level(s)))
            .collect()
    }

    fn factor_index(&self, name: &str) -> Result<usize, DoeError> {
        self.factors
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| DoeError::UnknownFactor(name.to_string()))
    }
}

/// Standard-order design: the last factor alternates fastest, so run 1 is all
/// low and run 2 differs only in the last factor.
pub fn factorial_design(factors: &[Factor]) -> Result<DesignMatrix, DoeError> {
    let k = factors.len();
    if k == 0 || k > MAX_FACTORS {
        return Err(DoeError::FactorCount(k));
    }
    let mut seen = HashSet::new();
    for f in factors {
        if !seen.insert(f.name.as_str()) {
            return Err(DoeError::Duplicate(f.name.clone()));
        }
        if f.low == f.high {
            return Err(DoeError::EqualLevels(f.name.clone()));
        }
    }
    let n = 1usize << k;
    let runs: Vec<Vec<i8>> = (0..n)
        .map(|r| {
            (0..k)
                .map(|f| if (r >> (k - 1 - f)) & 1 == 1 { 1 } else { -1 })
                .collect()
        })
        .collect();

    let mut subsets: Vec<Vec<usize>> = (1..n)
        .map(|mask| (0..k).filter(|f| mask >> f & 1 == 1).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let columns = subsets
        .into_iter()
        .map(|fs| {
            let signs = runs
                .iter()
                .map(|row| fs.iter().map(|&f| row[f]).product())
                .collect();
            let label = fs
                .iter()
                .map(|&f| factors[f].name.as_str())
                .collect::<Vec<_>>()
                .join(":");
            Column {
                factors: fs,
                label,
                signs,
            }
        })
        .collect();
    Ok(DesignMatrix {
        factors: factors.to_vec(),
        runs,
        columns,
        run_order: (0..n).collect(),
    })
}

/// Seeded random execution order; the standard order is kept.
pub fn randomize_runs(design: &DesignMatrix, seed: u64) -> DesignMatrix {
    let mut d = design.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    d.run_order = (0..d.runs.len()).collect();
    d.run_order.shuffle(&mut rng);
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    pub term: String,
    pub effect: f64,
    /// 1 for the largest |effect|.
    pub abs_rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectsTable {
    /// In design column order.
    pub effects: Vec<Effect>,
}

impl EffectsTable {
    pub fn get(&self, term: &str) -> Option<f64> {
        self.effects
            .iter()
            .find(|e| e.term == term)
            .map(|e| e.effect)
    }

    /// Terms sorted by |effect|, largest first.
    pub fn ranking(&self) -> Vec<&Effect> {
        let mut v: Vec<&Effect> = self.effects.iter().collect();
        v.sort_by_key(|e| e.abs_rank);
        v
    }
}

/// `effect = sum(sign * y) / 2^(k-1)` for every column. Responses are in
/// standard order.
pub fn effects(design: &DesignMatrix, responses: &[f64]) -> Result<EffectsTable, DoeError> {
    let n = design.runs.len();
    if responses.len() != n {
        return Err(DoeError::Length {
            expected: n,
            got: responses.len(),
        });
    }
    let half = (n / 2) as f64;
    let mut effects: Vec<Effect> = design
        .columns
        .iter()
        .map(|c| Effect {
            term: c.label.clone(),
            effect: c
                .signs
                .iter()
                .zip(responses)
                .map(|(&s, y)| s as f64 * y)
                .sum::<f64>()
                / half,
            abs_rank: 0,
        })
        .collect();
    let mut order: Vec<usize> = (0..effects.len()).collect();
    // stable: ties keep column order
    order.sort_by(|&a, &b| effects[b].effect.abs().total_cmp(&effects[a].effect.abs()));
    for (rank, i) in order.into_iter().enumerate() {
        effects[i].abs_rank = rank + 1;
    }
    Ok(EffectsTable { effects })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionCell {
    pub a_level: f64,
    pub b_level: f64,
    pub mean_response: f64,
}

/// Mean response in each of the four (a, b) level combinations, in the order
/// (−,−), (−,+), (+,−), (+,+).
pub fn interaction_table(
    design: &DesignMatrix,
    responses: &[f64],
    factor_a: &str,
    factor_b: &str,
) -> Result<[InteractionCell; 4], DoeError> {
    if responses.len() != design.runs.len() {
        return Err(DoeError::Length {
            expected: design.runs.len(),
            got: responses.len(),
        });
    }
    let a = design.factor_index(factor_a)?;
    let b = design.factor_index(factor_b)?;
    let cell = |sa: i8, sb: i8| {
        let ys: Vec<f64> = design
            .runs
            .iter()
            .zip(responses)
            .filter(|(row, _)| row[a] == sa && row[b] == sb)
            .map(|(_, &y)| y)
            .collect();
        InteractionCell {
            a_level: design.factors[a].level(sa),
            b_level: design.factors[b].level(sb),
            mean_response: ys.iter().sum::<f64>() / ys.len() as f64,
        }
    };
    Ok([cell(-1, -1), cell(-1, 1), cell(1, -1), cell(1, 1)])
}
