//! `sweep`: rerun a config over values of one axis and collect a long CSV.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use dpminimax::PrivacyBudget;
use serde::Serialize;

use crate::config::{ExperimentConfig, Family, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::output::fmt_f64;
use crate::runner::{check_metric, default_metric, metric_value, output_dir, run_experiment, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Epsilon,
    N,
    D,
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "epsilon" => Ok(Axis::Epsilon),
            "n" => Ok(Axis::N),
            "d" => Ok(Axis::D),
            other => Err(CliError::config(format!(
                "unknown axis `{other}`; expected epsilon, n or d"
            ))),
        }
    }
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Epsilon => "epsilon",
            Axis::N => "n",
            Axis::D => "d",
        }
    }

    fn format(self, v: f64) -> String {
        match self {
            Axis::Epsilon => v.to_string(),
            _ => (v as usize).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub seed: u64,
    pub metric: Option<f64>,
    pub algorithm: String,
}

/// Parses `"0.5,1,5"`.
pub fn parse_values(s: &str) -> CliResult<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::config(format!("sweep value `{t}` is not a number")))
        })
        .collect::<CliResult<_>>()?;
    if v.is_empty() {
        return Err(CliError::config("sweep needs at least one value"));
    }
    Ok(v)
}

fn count(axis: Axis, v: f64) -> CliResult<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
        Ok(v as usize)
    } else {
        Err(CliError::config(format!(
            "axis {} needs positive integers, got {v}",
            axis.name()
        )))
    }
}

/// Copy of `config` with the axis set to `v`.
pub fn apply_axis(config: &ExperimentConfig, axis: Axis, v: f64) -> CliResult<ExperimentConfig> {
    let mut c = config.clone();
    let p = &mut c.problem;
    match axis {
        Axis::Epsilon => {
            let b = c
                .budget
                .ok_or_else(|| CliError::config("an epsilon sweep needs a [budget]"))?;
            c.budget = Some(PrivacyBudget::new(v, b.delta())?);
        }
        Axis::N => {
            let n = count(axis, v)?;
            match p.family {
                Family::Quadratic => p.quadratic.get_or_insert_with(Default::default).n = n,
                Family::WorstGroup => p.worst_group.get_or_insert_with(Default::default).n = n,
                Family::Auc => {
                    let a = p.auc.get_or_insert_with(Default::default);
                    if a.csv.is_some() {
                        return Err(CliError::config("cannot sweep n over a CSV dataset"));
                    }
                    a.synthetic.get_or_insert_with(Default::default).n = n;
                }
                Family::Td => {
                    let t = p.td.get_or_insert_with(Default::default);
                    match &mut t.mdp {
                        Some(m) => m.n = n,
                        None => t.random.get_or_insert_with(Default::default).n = n,
                    }
                }
            }
        }
        Axis::D => {
            let d = count(axis, v)?;
            match p.family {
                Family::Quadratic => p.quadratic.get_or_insert_with(Default::default).dim_x = d,
                Family::WorstGroup => p.worst_group.get_or_insert_with(Default::default).dim = d,
                Family::Auc => {
                    let a = p.auc.get_or_insert_with(Default::default);
                    if a.csv.is_some() {
                        return Err(CliError::config("cannot sweep d over a CSV dataset"));
                    }
                    a.synthetic.get_or_insert_with(Default::default).dim = d;
                }
                Family::Td => {
                    let t = p.td.get_or_insert_with(Default::default);
                    if t.mdp.is_some() {
                        return Err(CliError::config("cannot sweep d over an explicit MDP"));
                    }
                    let r = t.random.get_or_insert_with(Default::default);
                    if r.one_hot {
                        return Err(CliError::config("one-hot features fix d to the number of states"));
                    }
                    r.feature_dim = d;
                }
            }
        }
    }
    Ok(c)
}

/// Runs the config once per value into `<out>/<axis>_<value>/` and writes
/// `<out>/sweep.csv` with columns `axis_value, seed, metric, algorithm`.
pub fn sweep(
    l: &LoadedConfig,
    axis: Axis,
    values: &[f64],
    metric: Option<&str>,
    opts: &RunOptions,
) -> CliResult<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::config("sweep needs at least one value"));
    }
    let metric = metric.unwrap_or_else(|| default_metric(l.config.problem.family));
    check_metric(metric)?;
    let root = output_dir(l, opts);
    fs::create_dir_all(&root)?;
    let mut rows = Vec::new();
    for &v in values {
        let config = apply_axis(&l.config, axis, v)?;
        let point = LoadedConfig { config, ..l.clone() };
        let sub = RunOptions {
            out: Some(root.join(format!("{}_{}", axis.name(), axis.format(v)))),
            ..opts.clone()
        };
        let result =
            run_experiment(&point, &sub).map_err(|e| e.context(format!("{} = {}", axis.name(), axis.format(v))))?;
        for r in &result.summary.records {
            rows.push(SweepRow {
                axis_value: v,
                seed: r.seed,
                metric: metric_value(r, metric)?,
                algorithm: l.config.algorithm.to_string(),
            });
        }
    }
    write_rows(&root.join("sweep.csv"), axis, &rows)?;
    Ok(rows)
}

fn write_rows(path: &Path, axis: Axis, rows: &[SweepRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["axis_value", "seed", "metric", "algorithm"])?;
    for r in rows {
        w.write_record([
            axis.format(r.axis_value),
            r.seed.to_string(),
            r.metric.map(fmt_f64).unwrap_or_default(),
            r.algorithm.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Seed-mean of the metric at each axis value, in sweep order.
pub fn seed_means(rows: &[SweepRow]) -> Vec<(f64, Option<f64>)> {
    let mut out: Vec<(f64, Vec<Option<f64>>)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(v, _)| *v == r.axis_value) {
            Some((_, vals)) => vals.push(r.metric),
            None => out.push((r.axis_value, vec![r.metric])),
        }
    }
    out.into_iter()
        .map(|(v, vals)| {
            let all: Option<Vec<f64>> = vals.into_iter().collect();
            (v, all.map(|a| a.iter().sum::<f64>() / a.len() as f64))
        })
        .collect()
}

/// Number of adjacent pairs where the sequence decreases.
pub fn inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] < w[0]).count()
}
