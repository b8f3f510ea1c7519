//! `compare`: paired per-seed comparison of two experiments.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::config::{AlgorithmKind, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::runner::{check_metric, metric_value, output_dir, run_experiment, RunOptions, Summary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDelta {
    pub seed: u64,
    pub a: f64,
    pub b: f64,
    /// `a − b`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub metric: String,
    pub config_a: String,
    pub config_b: String,
    pub algorithm_a: AlgorithmKind,
    pub algorithm_b: AlgorithmKind,
    pub pairs: Vec<PairedDelta>,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_delta: f64,
    /// Seeds with `a < b`, `a > b` and ties.
    pub a_lower: usize,
    pub a_higher: usize,
    pub ties: usize,
    /// Two-sided exact sign test over the non-tied pairs; 1 when all tie.
    pub sign_test_p: f64,
    pub estimator_variance_a: Option<f64>,
    pub estimator_variance_b: Option<f64>,
}

/// Two-sided exact binomial sign test: `min(1, 2·P(X ≤ min(k₊, k₋)))` with
/// `X ~ Bin(k₊ + k₋, 1/2)`.
pub fn sign_test(lower: usize, higher: usize) -> f64 {
    let k = (lower + higher) as u64;
    if k == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, k).expect("p = 1/2 is valid");
    (2.0 * b.cdf(lower.min(higher) as u64)).min(1.0)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pairs two finished experiments seed by seed.
pub fn compare_summaries(a: &Summary, b: &Summary, metric: &str) -> CliResult<CompareReport> {
    let mut sa: Vec<u64> = a.records.iter().map(|r| r.seed).collect();
    let mut sb: Vec<u64> = b.records.iter().map(|r| r.seed).collect();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return Err(CliError::config(format!("seed lists differ: {sa:?} vs {sb:?}")));
    }
    let mut pairs = Vec::with_capacity(sa.len());
    for seed in sa {
        let get = |s: &Summary, side: &str| -> CliResult<f64> {
            let r = s.record(seed).expect("seed present");
            metric_value(r, metric)?.ok_or_else(|| {
                CliError::config(format!("metric `{metric}` is not available for {side} ({})", s.problem))
            })
        };
        let (va, vb) = (get(a, "A")?, get(b, "B")?);
        pairs.push(PairedDelta {
            seed,
            a: va,
            b: vb,
            delta: va - vb,
        });
    }
    let a_lower = pairs.iter().filter(|p| p.delta < 0.0).count();
    let a_higher = pairs.iter().filter(|p| p.delta > 0.0).count();
    let ties = pairs.len() - a_lower - a_higher;
    let col = |f: fn(&PairedDelta) -> f64| pairs.iter().map(f).collect::<Vec<_>>();
    Ok(CompareReport {
        metric: metric.to_string(),
        config_a: a.config.clone(),
        config_b: b.config.clone(),
        algorithm_a: a.algorithm,
        algorithm_b: b.algorithm,
        mean_a: mean(&col(|p| p.a)),
        mean_b: mean(&col(|p| p.b)),
        mean_delta: mean(&col(|p| p.delta)),
        a_lower,
        a_higher,
        ties,
        sign_test_p: sign_test(a_lower, a_higher),
        estimator_variance_a: a.aggregate.last_quartile_estimator_variance,
        estimator_variance_b: b.aggregate.last_quartile_estimator_variance,
        pairs,
    })
}

/// Runs both configs and compares them. Requires the same problem, budget
/// and seed list. Artifacts land in `<out>/a` and `<out>/b`, the report in
/// `<out>/compare.json`.
pub fn compare(a: &LoadedConfig, b: &LoadedConfig, metric: &str, opts: &RunOptions) -> CliResult<CompareReport> {
    let (ca, cb) = (&a.config, &b.config);
    let mut sa = ca.seeds.clone();
    let mut sb = cb.seeds.clone();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return Err(CliError::config(format!(
            "{} and {} have different seed lists",
            a.name, b.name
        )));
    }
    if ca.problem != cb.problem || ca.data_seed != cb.data_seed {
        return Err(CliError::config(format!(
            "{} and {} describe different problems",
            a.name, b.name
        )));
    }
    if ca.budget != cb.budget {
        return Err(CliError::config(format!(
            "{} and {} have different budgets",
            a.name, b.name
        )));
    }
    check_metric(metric)?;
    let root: PathBuf = output_dir(a, opts);
    let side = |dir: &str| RunOptions {
        out: Some(root.join(dir)),
        ..opts.clone()
    };
    let ra = run_experiment(a, &side("a"))?;
    let rb = run_experiment(b, &side("b"))?;
    let report = compare_summaries(&ra.summary, &rb.summary, metric)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(root.join("compare.json"), text)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_hand_values() {
        assert_eq!(sign_test(0, 0), 1.0);
        // 2·(1 + 20 + 190)/2²⁰
        let p = sign_test(18, 2);
        assert!((p - 2.0 * 211.0 / 1048576.0).abs() < 1e-15, "{p}");
        assert!((sign_test(10, 10) - 1.0).abs() < 1e-12);
        // 2·2⁻⁵ for a 5–0 split
        assert!((sign_test(0, 5) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn sign_test_symmetric() {
        for (a, b) in [(3, 7), (1, 12), (15, 5)] {
            assert!((sign_test(a, b) - sign_test(b, a)).abs() < 1e-15);
        }
    }
}
