//! `run`: one optimizer run per seed, traces, budget check and summary.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dpminimax::optimizers::{dp_sgda_observed, gda_reference, privatediff_minimax_observed, OptimizerOutput};
use dpminimax::privacy::{delta_for_epsilon, verify_budget, AccountantLedger, Mechanism};
use dpminimax::problems::analytic_phi_grad;
use dpminimax::verification::variance_stats;
use dpminimax::{MinimaxProblem, OptimizerTrace, RoundRecord, Vector};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AlgorithmKind, Family, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::output::{render_svg, TraceWriter};
use crate::problem::{build_problem, BuiltProblem};
use crate::resolve::{resolve_run, GdaSettings, ResolvedAlgorithm, ResolvedRun};

pub const SUMMARY_SCHEMA: &str = "dpminimax.summary/1";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the config's `output_dir`.
    pub out: Option<PathBuf>,
    /// Added to every seed of the config.
    pub seed_offset: u64,
    pub svg: bool,
}

/// One row of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub seed: u64,
    /// Round of the returned iterate.
    pub selected_round: usize,
    /// `‖∇Φ(x^priv)‖` from the family's exact inner maximizer.
    pub grad_phi_norm: Option<f64>,
    pub auc: Option<f64>,
    /// Population MSPBE of the returned θ.
    pub mspbe: Option<f64>,
    pub worst_group_loss: Option<f64>,
    pub target_epsilon: Option<f64>,
    pub target_delta: Option<f64>,
    /// Accountant tail bound at `target_epsilon`; `None` for non-private runs.
    pub achieved_delta: Option<f64>,
    pub accountant_lambda: Option<u32>,
    pub budget_passed: Option<bool>,
    pub noise_inflation: f64,
    /// Trace rows (rounds `0..=R`).
    pub rounds: usize,
    /// Rows on which any clipping threshold was active.
    pub clipped_rounds: usize,
    /// Zero unless the schedule enables `wallclock`.
    pub wallclock_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub seeds: usize,
    pub mean_grad_phi_norm: Option<f64>,
    pub mean_auc: Option<f64>,
    pub mean_mspbe: Option<f64>,
    pub mean_worst_group_loss: Option<f64>,
    pub max_achieved_delta: Option<f64>,
    /// Cross-seed variance of the estimator norm averaged over the last
    /// quarter of the rounds; needs two or more seeds.
    pub last_quartile_estimator_variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub config: String,
    pub algorithm: AlgorithmKind,
    pub problem: Family,
    pub n: usize,
    pub dim_x: usize,
    pub dim_y: usize,
    pub records: Vec<SummaryRecord>,
    pub aggregate: Aggregate,
}

impl Summary {
    pub fn record(&self, seed: u64) -> Option<&SummaryRecord> {
        self.records.iter().find(|r| r.seed == seed)
    }
}

/// Metric names accepted by `compare` and `sweep`.
pub const METRICS: &[&str] = &[
    "grad_phi_norm",
    "auc",
    "mspbe",
    "worst_group_loss",
    "achieved_delta",
    "noise_inflation",
    "wallclock_ms",
];

pub fn check_metric(name: &str) -> CliResult<()> {
    if METRICS.contains(&name) {
        Ok(())
    } else {
        Err(CliError::config(format!(
            "unknown metric `{name}`; expected one of {}",
            METRICS.join(", ")
        )))
    }
}

pub fn metric_value(r: &SummaryRecord, name: &str) -> CliResult<Option<f64>> {
    check_metric(name)?;
    Ok(match name {
        "grad_phi_norm" => r.grad_phi_norm,
        "auc" => r.auc,
        "mspbe" => r.mspbe,
        "worst_group_loss" => r.worst_group_loss,
        "achieved_delta" => r.achieved_delta,
        "noise_inflation" => Some(r.noise_inflation),
        _ => Some(r.wallclock_ms),
    })
}

/// Headline metric of a family.
pub fn default_metric(family: Family) -> &'static str {
    match family {
        Family::Auc => "auc",
        Family::Td => "mspbe",
        Family::Quadratic | Family::WorstGroup => "grad_phi_norm",
    }
}

/// Everything a finished seed produced.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub record: SummaryRecord,
    pub trace: OptimizerTrace,
    pub dims: (usize, usize, usize),
}

pub struct ExperimentResult {
    pub summary: Summary,
    pub traces: Vec<(u64, OptimizerTrace)>,
    pub out_dir: PathBuf,
}

pub fn output_dir(l: &LoadedConfig, opts: &RunOptions) -> PathBuf {
    opts.out.clone().unwrap_or_else(|| l.config.output_dir.clone())
}

pub fn seeds(l: &LoadedConfig, opts: &RunOptions) -> CliResult<Vec<u64>> {
    l.config
        .seeds
        .iter()
        .map(|s| {
            s.checked_add(opts.seed_offset)
                .ok_or_else(|| CliError::config(format!("seed {s} + offset {} overflows", opts.seed_offset)))
        })
        .collect()
}

/// Resolved schedules without running anything (`--dry-run`).
pub fn dry_run(l: &LoadedConfig, opts: &RunOptions) -> CliResult<Vec<ResolvedRun>> {
    seeds(l, opts)?
        .into_iter()
        .map(|seed| {
            let problem = build_problem(l, seed)?;
            resolve_run(l, problem.as_dyn(), seed)
        })
        .collect()
}

fn gda_output(problem: &dyn MinimaxProblem, g: &GdaSettings) -> CliResult<OptimizerOutput> {
    let x0 =
        g.x0.as_ref()
            .map(|v| Vector::from_column_slice(v))
            .unwrap_or_else(|| Vector::zeros(problem.dim_x()));
    let y0 =
        g.y0.as_ref()
            .map(|v| Vector::from_column_slice(v))
            .unwrap_or_else(|| Vector::zeros(problem.dim_y()));
    let iterates = gda_reference(problem, &x0, &y0, g.iterations, g.eta_x, g.eta_y)?;
    let records = iterates
        .iter()
        .enumerate()
        .map(|(round, (x, y))| RoundRecord {
            round,
            grad_phi_norm: if g.metrics {
                analytic_phi_grad(problem, x).ok().map(|(_, d)| d.norm())
            } else {
                None
            },
            loss: if g.metrics { Some(problem.full_loss(x, y)) } else { None },
            noise_x_norm: 0.0,
            noise_x_std: 0.0,
            c2r: None,
            estimator_norm: problem.full_grad_x(x, y).norm(),
            clipped: false,
            wallclock_ms: 0.0,
        })
        .collect();
    let (x, y) = iterates.last().cloned().expect("gda returns x_0");
    Ok(OptimizerOutput {
        x_priv: x,
        y_priv: y,
        selected_round: g.iterations,
        trace: OptimizerTrace {
            records,
            iterates: Vec::new(),
            first_selectable: 0,
        },
        mechanisms: Vec::new(),
    })
}

struct BudgetCheck {
    target_epsilon: Option<f64>,
    target_delta: Option<f64>,
    achieved_delta: Option<f64>,
    lambda: Option<u32>,
    passed: Option<bool>,
}

fn check_budget(l: &LoadedConfig, mechanisms: &[Mechanism]) -> CliResult<BudgetCheck> {
    let acc = l.config.accountant.config();
    let none = BudgetCheck {
        target_epsilon: None,
        target_delta: None,
        achieved_delta: None,
        lambda: None,
        passed: None,
    };
    if mechanisms.is_empty() {
        return Ok(none);
    }
    if let Some(b) = &l.config.budget {
        let r = verify_budget(mechanisms, b, &acc)?;
        return Ok(BudgetCheck {
            target_epsilon: Some(b.epsilon()),
            target_delta: Some(b.delta()),
            achieved_delta: Some(r.achieved_delta),
            lambda: Some(r.lambda),
            passed: Some(r.passed),
        });
    }
    match l.config.accountant.audit_epsilon {
        Some(eps) => {
            let inc = mechanisms
                .iter()
                .map(|m| m.log_moments(&acc))
                .collect::<dpminimax::Result<Vec<_>>>()?;
            let ledger = AccountantLedger::new(acc.lambda_max).compose(&inc)?;
            let t = delta_for_epsilon(&ledger, eps)?;
            Ok(BudgetCheck {
                target_epsilon: Some(eps),
                achieved_delta: Some(t.delta),
                lambda: Some(t.lambda),
                ..none
            })
        }
        None => Ok(none),
    }
}

fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed{seed}.csv"))
}

/// Runs one seed, streaming its trace to `dir` when given.
pub fn run_seed(l: &LoadedConfig, seed: u64, dir: Option<&Path>) -> CliResult<SeedResult> {
    let problem: BuiltProblem = build_problem(l, seed)?;
    let p = problem.as_dyn();
    let resolved = resolve_run(l, p, seed)?;
    let mut writer = match dir {
        Some(d) => Some(TraceWriter::new(BufWriter::new(File::create(trace_path(d, seed))?))?),
        None => None,
    };
    let mut sink_error: Option<CliError> = None;
    let mut observe = |r: &RoundRecord| {
        if let (Some(w), None) = (writer.as_mut(), sink_error.as_ref()) {
            if let Err(e) = w.row(r) {
                sink_error = Some(e);
            }
        }
    };
    let start = Instant::now();
    let (out, timed): (CliResult<OptimizerOutput>, bool) = match &resolved.algorithm {
        ResolvedAlgorithm::DpSgda(c) => (
            dp_sgda_observed(p, c, &mut observe).map_err(CliError::from),
            c.wallclock,
        ),
        ResolvedAlgorithm::Privatediff(c) => (
            privatediff_minimax_observed(p, c, &mut observe).map_err(CliError::from),
            c.wallclock,
        ),
        ResolvedAlgorithm::GdaReference(g) => {
            let out = gda_output(p, g);
            if let Ok(o) = &out {
                o.trace.records.iter().for_each(&mut observe);
            }
            (out, false)
        }
    };
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let out = out.map_err(|e| e.context(format!("seed {seed}")))?;
    if let Some(e) = sink_error {
        return Err(e);
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    let budget = check_budget(l, &out.mechanisms)?;
    if budget.passed == Some(false) {
        return Err(CliError::numerical(format!(
            "seed {seed}: achieved delta {:e} exceeds the configured {:e} at epsilon {}",
            budget.achieved_delta.unwrap_or(f64::NAN),
            budget.target_delta.unwrap_or(f64::NAN),
            budget.target_epsilon.unwrap_or(f64::NAN)
        )));
    }
    let x = &out.x_priv;
    let grad_phi_norm = analytic_phi_grad(p, x).ok().map(|(_, g)| g.norm());
    if let Some(g) = grad_phi_norm {
        if !g.is_finite() {
            return Err(CliError::numerical(format!(
                "seed {seed}: non-finite gradient norm at the output"
            )));
        }
    }
    let record = SummaryRecord {
        seed,
        selected_round: out.selected_round,
        grad_phi_norm,
        auc: problem.auc(x),
        mspbe: problem.mspbe(x),
        worst_group_loss: problem.worst_group_loss(x),
        target_epsilon: budget.target_epsilon,
        target_delta: budget.target_delta,
        achieved_delta: budget.achieved_delta,
        accountant_lambda: budget.lambda,
        budget_passed: budget.passed,
        noise_inflation: resolved.noise_inflation,
        rounds: out.trace.records.len(),
        clipped_rounds: out.trace.records.iter().filter(|r| r.clipped).count(),
        wallclock_ms: if timed { elapsed } else { 0.0 },
    };
    info!("{}: seed {seed} done ({:.0} ms)", l.name, elapsed);
    Ok(SeedResult {
        record,
        trace: out.trace,
        dims: (p.n(), p.dim_x(), p.dim_y()),
    })
}

fn mean_of(records: &[SummaryRecord], f: impl Fn(&SummaryRecord) -> Option<f64>) -> Option<f64> {
    let v: Option<Vec<f64>> = records.iter().map(f).collect();
    v.filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn aggregate(records: &[SummaryRecord], traces: &[(u64, OptimizerTrace)]) -> Aggregate {
    let runs: Vec<OptimizerTrace> = traces.iter().map(|(_, t)| t.clone()).collect();
    let variance = variance_stats(&runs).ok().map(|r| r.last_quartile_estimator_variance());
    Aggregate {
        seeds: records.len(),
        mean_grad_phi_norm: mean_of(records, |r| r.grad_phi_norm),
        mean_auc: mean_of(records, |r| r.auc),
        mean_mspbe: mean_of(records, |r| r.mspbe),
        mean_worst_group_loss: mean_of(records, |r| r.worst_group_loss),
        max_achieved_delta: records
            .iter()
            .filter_map(|r| r.achieved_delta)
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d)))),
        last_quartile_estimator_variance: variance,
    }
}

/// Runs every seed (in parallel), writes `trace_seed<k>.csv`, `summary.json`
/// and optionally `grad_phi.svg` under the output directory.
pub fn run_experiment(l: &LoadedConfig, opts: &RunOptions) -> CliResult<ExperimentResult> {
    let dir = output_dir(l, opts);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {}: {e}", dir.display())))?;
    let seeds = seeds(l, opts)?;
    let mut results: Vec<(u64, CliResult<SeedResult>)> =
        seeds.par_iter().map(|&s| (s, run_seed(l, s, Some(&dir)))).collect();
    results.sort_by_key(|(s, _)| *s);
    let mut ok = Vec::with_capacity(results.len());
    for (_, r) in results {
        ok.push(r?);
    }
    let (n, dim_x, dim_y) = ok[0].dims;
    let records: Vec<SummaryRecord> = ok.iter().map(|r| r.record.clone()).collect();
    let traces: Vec<(u64, OptimizerTrace)> = ok.into_iter().map(|r| (r.record.seed, r.trace)).collect();
    let summary = Summary {
        schema: SUMMARY_SCHEMA.into(),
        config: l.name.clone(),
        algorithm: l.config.algorithm,
        problem: l.config.problem.family,
        n,
        dim_x,
        dim_y,
        aggregate: aggregate(&records, &traces),
        records,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)?;
    if opts.svg {
        let series: Vec<(u64, &[RoundRecord])> = traces.iter().map(|(s, t)| (*s, t.records.as_slice())).collect();
        let title = format!("{} on {}", l.config.algorithm, l.config.problem.family);
        if let Some(svg) = render_svg(&series, &title) {
            fs::write(dir.join("grad_phi.svg"), svg)?;
        }
    }
    Ok(ExperimentResult {
        summary,
        traces,
        out_dir: dir,
    })
}
