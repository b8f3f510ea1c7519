use serde::{Deserialize, Serialize};

use crate::optimizers::OptimizerTrace;
use crate::{Error, Result};

/// Per-round cross-seed statistics. Variances use the unbiased `k − 1`
/// denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub runs: usize,
    pub estimator_variance: Vec<f64>,
    pub estimator_mean_norm: Vec<f64>,
    /// `None` for rounds where any run lacks an analytic `‖∇Φ‖`.
    pub grad_phi_variance: Vec<Option<f64>>,
    pub grad_phi_mean: Vec<Option<f64>>,
}

impl VarianceReport {
    /// Mean estimator variance over the last quarter of the rounds (at least
    /// one round).
    pub fn last_quartile_estimator_variance(&self) -> f64 {
        let n = self.estimator_variance.len();
        let k = (n / 4).max(1).min(n);
        self.estimator_variance[n - k..].iter().sum::<f64>() / k as f64
    }
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    // shifted by the first value so that identical inputs give exactly zero
    let k = values.len() as f64;
    let s = values[0];
    let d: f64 = values.iter().map(|v| v - s).sum();
    let d2: f64 = values.iter().map(|v| (v - s).powi(2)).sum();
    (s + d / k, ((d2 - d * d / k) / (k - 1.0)).max(0.0))
}

pub fn variance_stats(runs: &[OptimizerTrace]) -> Result<VarianceReport> {
    if runs.len() < 2 {
        return Err(Error::param("runs", "need at least two traces"));
    }
    let rounds = runs[0].len();
    if rounds == 0 {
        return Err(Error::Empty("trace"));
    }
    if let Some(t) = runs.iter().find(|t| t.len() != rounds) {
        return Err(Error::LengthMismatch(format!(
            "trace lengths {} and {}",
            rounds,
            t.len()
        )));
    }
    let mut report = VarianceReport {
        runs: runs.len(),
        estimator_variance: Vec::with_capacity(rounds),
        estimator_mean_norm: Vec::with_capacity(rounds),
        grad_phi_variance: Vec::with_capacity(rounds),
        grad_phi_mean: Vec::with_capacity(rounds),
    };
    for r in 0..rounds {
        let est: Vec<f64> = runs.iter().map(|t| t.records[r].estimator_norm).collect();
        let (m, v) = mean_var(&est);
        report.estimator_mean_norm.push(m);
        report.estimator_variance.push(v);
        let phi: Option<Vec<f64>> = runs.iter().map(|t| t.records[r].grad_phi_norm).collect();
        let (pm, pv) = match phi {
            Some(p) => {
                let (a, b) = mean_var(&p);
                (Some(a), Some(b))
            }
            None => (None, None),
        };
        report.grad_phi_mean.push(pm);
        report.grad_phi_variance.push(pv);
    }
    Ok(report)
}
