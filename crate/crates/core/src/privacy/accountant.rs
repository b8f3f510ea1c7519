//! Moments accountant.
//!
//! Log-moments `α(λ)` are tracked on the integer grid `λ = 1..=lambda_max`,
//! composed additively across mechanisms and converted to `(ε, δ)` with the
//! tail bound `δ = min_λ exp(α(λ) − λε)`.

use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::PrivacyBudget;
use crate::{Error, Result};

pub const DEFAULT_LAMBDA_MAX: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccountantConfig {
    /// Largest moment order searched by the tail bound.
    pub lambda_max: u32,
    /// Constant `c` in front of the `m³λ³/(n³σ³)` remainder of the
    /// subsampled log-moment bound. Zero keeps only the leading term.
    pub higher_order_constant: f64,
}

impl Default for AccountantConfig {
    fn default() -> Self {
        Self {
            lambda_max: DEFAULT_LAMBDA_MAX,
            higher_order_constant: 0.0,
        }
    }
}

/// A Gaussian mechanism applied to a uniformly subsampled batch
/// (sampling without replacement).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsampledMechanismSpec {
    pub batch_size: usize,
    pub dataset_size: usize,
    /// Noise standard deviation divided by the query's l2-sensitivity.
    pub noise_multiplier: f64,
    pub invocations: usize,
}

impl SubsampledMechanismSpec {
    pub fn new(batch_size: usize, dataset_size: usize, noise_multiplier: f64, invocations: usize) -> Result<Self> {
        let spec = Self {
            batch_size,
            dataset_size,
            noise_multiplier,
            invocations,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be >= 1"));
        }
        if self.batch_size >= self.dataset_size {
            return Err(Error::param(
                "batch_size",
                format!(
                    "subsampling bound needs m < n (m = {}, n = {})",
                    self.batch_size, self.dataset_size
                ),
            ));
        }
        if !(self.noise_multiplier > 0.0) {
            return Err(Error::param(
                "noise_multiplier",
                format!("must be > 0, got {}", self.noise_multiplier),
            ));
        }
        Ok(())
    }
}

/// Upper bound on the `λ`-th log-moment of one invocation of a subsampled
/// Gaussian mechanism:
///
/// `m²nλ(λ+1) / (n²(n−m)σ̃²) + c·m³λ³/(n³σ̃³)`.
pub fn log_moment_subsampled(spec: &SubsampledMechanismSpec, lambda: u32, higher_order_constant: f64) -> Result<f64> {
    spec.validate()?;
    if lambda == 0 {
        return Err(Error::param("lambda", "moment order must be >= 1"));
    }
    let m = spec.batch_size as f64;
    let n = spec.dataset_size as f64;
    let s = spec.noise_multiplier;
    let l = lambda as f64;
    let lead = m * m * n * l * (l + 1.0) / (n * n * (n - m) * s * s);
    let rest = if higher_order_constant == 0.0 {
        0.0
    } else {
        higher_order_constant * (m * l / (n * s)).powi(3)
    };
    Ok(lead + rest)
}

/// `λ`-th log-moment of a full-data Gaussian mechanism with noise
/// multiplier `σ̃`: `λ(λ+1)/(2σ̃²)`.
pub fn gaussian_log_moment(noise_multiplier: f64, lambda: u32) -> Result<f64> {
    if !(noise_multiplier > 0.0) {
        return Err(Error::param(
            "noise_multiplier",
            format!("must be > 0, got {noise_multiplier}"),
        ));
    }
    if lambda == 0 {
        return Err(Error::param("lambda", "moment order must be >= 1"));
    }
    let l = lambda as f64;
    Ok(l * (l + 1.0) / (2.0 * noise_multiplier * noise_multiplier))
}

/// One entry of a run's mechanism schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mechanism {
    Subsampled(SubsampledMechanismSpec),
    /// Gaussian noise on a query of the whole dataset (no amplification).
    Gaussian {
        noise_multiplier: f64,
        invocations: usize,
    },
}

impl Mechanism {
    pub fn invocations(&self) -> usize {
        match self {
            Mechanism::Subsampled(s) => s.invocations,
            Mechanism::Gaussian { invocations, .. } => *invocations,
        }
    }

    pub fn noise_multiplier(&self) -> f64 {
        match self {
            Mechanism::Subsampled(s) => s.noise_multiplier,
            Mechanism::Gaussian { noise_multiplier, .. } => *noise_multiplier,
        }
    }

    /// Same mechanism with its noise multiplier multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Mechanism::Subsampled(s) => Mechanism::Subsampled(SubsampledMechanismSpec {
                noise_multiplier: s.noise_multiplier * factor,
                ..s
            }),
            Mechanism::Gaussian {
                noise_multiplier,
                invocations,
            } => Mechanism::Gaussian {
                noise_multiplier: noise_multiplier * factor,
                invocations,
            },
        }
    }

    /// Total log-moment of all invocations at every order `1..=lambda_max`.
    pub fn log_moments(&self, config: &AccountantConfig) -> Result<Vec<f64>> {
        let k = self.invocations() as f64;
        (1..=config.lambda_max)
            .map(|l| {
                let one = match self {
                    Mechanism::Subsampled(s) => log_moment_subsampled(s, l, config.higher_order_constant)?,
                    Mechanism::Gaussian { noise_multiplier, .. } => gaussian_log_moment(*noise_multiplier, l)?,
                };
                Ok(k * one)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogMomentEntry {
    pub lambda: u32,
    pub alpha: f64,
}

/// Accumulated log-moments on the grid `λ = 1..=lambda_max`.
///
/// Composition keeps every contribution; totals are recomputed by summing
/// each order's contributions in ascending order of value, so the result does
/// not depend on the order in which mechanisms were composed.
#[derive(Debug, Clone, PartialEq)]
pub struct AccountantLedger {
    lambda_max: u32,
    contributions: Vec<Vec<f64>>,
    totals: Vec<f64>,
}

impl AccountantLedger {
    pub fn new(lambda_max: u32) -> Self {
        Self {
            lambda_max,
            contributions: Vec::new(),
            totals: vec![0.0; lambda_max as usize],
        }
    }

    pub fn lambda_max(&self) -> u32 {
        self.lambda_max
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_max == 0
    }

    /// `α(λ)`; `None` outside the grid.
    pub fn alpha(&self, lambda: u32) -> Option<f64> {
        if lambda == 0 {
            return None;
        }
        self.totals.get(lambda as usize - 1).copied()
    }

    pub fn log_moments(&self) -> &[f64] {
        &self.totals
    }

    pub fn entries(&self) -> Vec<LogMomentEntry> {
        self.totals
            .iter()
            .enumerate()
            .map(|(i, &alpha)| LogMomentEntry {
                lambda: i as u32 + 1,
                alpha,
            })
            .collect()
    }

    /// Adds per-order log-moment increments, `α(λ) += Σₜ αₜ(λ)`.
    pub fn compose(&self, increments: &[Vec<f64>]) -> Result<Self> {
        let expected = self.lambda_max as usize;
        for inc in increments {
            if inc.len() != expected {
                return Err(Error::GridMismatch {
                    expected,
                    found: inc.len(),
                });
            }
            if inc.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                return Err(Error::param("log-moment", "must be finite and >= 0"));
            }
        }
        let mut contributions = self.contributions.clone();
        contributions.extend(increments.iter().cloned());
        let totals = Self::sum_contributions(expected, &contributions);
        Ok(Self {
            lambda_max: self.lambda_max,
            contributions,
            totals,
        })
    }

    /// Composes two ledgers defined on the same grid.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if other.lambda_max != self.lambda_max {
            return Err(Error::GridMismatch {
                expected: self.lambda_max as usize,
                found: other.lambda_max as usize,
            });
        }
        self.compose(&other.contributions)
    }

    fn sum_contributions(len: usize, contributions: &[Vec<f64>]) -> Vec<f64> {
        let mut column = Vec::with_capacity(contributions.len());
        (0..len)
            .map(|i| {
                column.clear();
                column.extend(contributions.iter().map(|c| c[i]));
                column.sort_by(f64::total_cmp);
                column.iter().fold(0.0, |acc, a| acc + a)
            })
            .collect()
    }
}

impl Serialize for AccountantLedger {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.totals.len()))?;
        for e in self.entries() {
            seq.serialize_element(&e)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for AccountantLedger {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let entries = Vec::<LogMomentEntry>::deserialize(deserializer)?;
        for (i, e) in entries.iter().enumerate() {
            if e.lambda as usize != i + 1 {
                return Err(D::Error::custom("ledger orders must be 1, 2, ... in sequence"));
            }
        }
        let ledger = AccountantLedger::new(entries.len() as u32);
        ledger
            .compose(&[entries.iter().map(|e| e.alpha).collect()])
            .map_err(D::Error::custom)
    }
}

/// Result of the tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound {
    pub delta: f64,
    /// Order attaining the minimum (smallest such order on ties).
    pub lambda: u32,
}

/// `δ = min_λ exp(α(λ) − λε)`, capped at 1.
pub fn delta_for_epsilon(ledger: &AccountantLedger, epsilon: f64) -> Result<TailBound> {
    if ledger.is_empty() {
        return Err(Error::EmptyLedger);
    }
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", format!("must be > 0, got {epsilon}")));
    }
    let mut best = TailBound {
        delta: f64::INFINITY,
        lambda: 1,
    };
    for (i, alpha) in ledger.log_moments().iter().enumerate() {
        let lambda = i as u32 + 1;
        let exponent = alpha - lambda as f64 * epsilon;
        let d = exponent.exp();
        if d < best.delta {
            best = TailBound { delta: d, lambda };
        }
    }
    best.delta = best.delta.min(1.0);
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub target_epsilon: f64,
    pub target_delta: f64,
    pub achieved_delta: f64,
    pub lambda: u32,
    pub passed: bool,
    pub ledger: AccountantLedger,
}

/// Composes every invocation in `schedule` and checks the achieved `δ` at the
/// budget's `ε` against the budget's `δ`.
pub fn verify_budget(
    schedule: &[Mechanism],
    budget: &PrivacyBudget,
    config: &AccountantConfig,
) -> Result<BudgetReport> {
    let increments = schedule
        .iter()
        .map(|m| m.log_moments(config))
        .collect::<Result<Vec<_>>>()?;
    let ledger = AccountantLedger::new(config.lambda_max).compose(&increments)?;
    let tail = delta_for_epsilon(&ledger, budget.epsilon())?;
    Ok(BudgetReport {
        target_epsilon: budget.epsilon(),
        target_delta: budget.delta(),
        achieved_delta: tail.delta,
        lambda: tail.lambda,
        passed: tail.delta <= budget.delta(),
        ledger,
    })
}
