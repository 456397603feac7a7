//! CSV writers. Numbers use the shortest round-trip decimal form.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::{
    ExperimentError, ExperimentOutcome, ExperimentSpec, InteractionResult, Metric, PointResult,
};
use crate::doe::EffectsTable;

/// One row per point: parameters, each metric and its `_ci` half-width,
/// seed, simulated seconds and event count.
pub fn write_points_csv<W: Write>(
    w: W,
    params: &[String],
    metrics: &[Metric],
    rows: &[PointResult],
) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = params.to_vec();
    for m in metrics {
        header.push(m.name().to_string());
        header.push(format!("{}_ci", m.name()));
    }
    header.extend(["seed", "simulated_time_s", "events"].map(String::from));
    out.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = params
            .iter()
            .map(|p| {
                r.point
                    .iter()
                    .find(|(k, _)| k == p)
                    .map_or(String::new(), |(_, v)| v.to_string())
            })
            .collect();
        for m in metrics {
            let e = m.of(&r.report);
            rec.push(e.value.to_string());
            rec.push(e.ci_halfwidth.to_string());
        }
        rec.extend([
            r.seed.to_string(),
            r.simulated_time.to_string(),
            r.events.to_string(),
        ]);
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_effects_csv<W: Write>(w: W, table: &EffectsTable) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["term", "effect", "abs_rank"])?;
    for e in &table.effects {
        out.write_record([e.term.clone(), e.effect.to_string(), e.abs_rank.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_interaction_csv<W: Write>(w: W, table: &InteractionResult) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["a_level", "b_level", "mean_response"])?;
    for c in &table.cells {
        out.write_record([
            c.a_level.to_string(),
            c.b_level.to_string(),
            c.mean_response.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(
    path: PathBuf,
    f: impl FnOnce(File) -> csv::Result<()>,
) -> Result<PathBuf, ExperimentError> {
    let file = File::create(&path).map_err(io_err(&path))?;
    f(file).map_err(|e| io_err(&path)(e.into()))?;
    Ok(path)
}

/// Write every CSV of an outcome into `dir`, creating it if needed.
/// Returns the files written, in order.
pub fn write_outcome(
    spec: &ExperimentSpec,
    outcome: &ExperimentOutcome,
    dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let stem = &spec.stem;
    let mut written = Vec::new();
    match outcome {
        ExperimentOutcome::Sweep(rows) => {
            let params: Vec<String> = spec.sweep.iter().map(|a| a.param.clone()).collect();
            match spec
                .split_by
                .as_ref()
                .and_then(|s| spec.sweep.iter().find(|a| &a.param == s))
            {
                Some(axis) => {
                    for &v in &axis.values {
                        let part: Vec<PointResult> = rows
                            .iter()
                            .filter(|r| r.point.iter().any(|(k, x)| k == &axis.param && *x == v))
                            .cloned()
                            .collect();
                        let path = dir.join(format!("{stem}_{}{v}.csv", axis.param));
                        written.push(write_file(path, |f| {
                            write_points_csv(f, &params, &spec.metrics, &part)
                        })?);
                    }
                }
                None => {
                    let path = dir.join(format!("{stem}.csv"));
                    written.push(write_file(path, |f| {
                        write_points_csv(f, &params, &spec.metrics, rows)
                    })?);
                }
            }
        }
        ExperimentOutcome::Doe(d) => {
            let params: Vec<String> = d.design.factors.iter().map(|f| f.name.clone()).collect();
            let path = dir.join(format!("{stem}_runs.csv"));
            written.push(write_file(path, |f| {
                write_points_csv(f, &params, &spec.metrics, &d.runs)
            })?);
            let path = dir.join(format!("{stem}_effects.csv"));
            written.push(write_file(path, |f| write_effects_csv(f, &d.effects))?);
            for t in &d.interactions {
                let path = dir.join(format!(
                    "{stem}_interaction_{}_{}.csv",
                    t.factor_a, t.factor_b
                ));
                written.push(write_file(path, |f| write_interaction_csv(f, t))?);
            }
        }
    }
    Ok(written)
}
