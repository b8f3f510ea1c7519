//! Closed-form noise calibration.
//!
//! DP-SGDA: `σ_x = 8·C₁·√(T ln(1/δ))/(nε)`, `σ_y = 8·C₂·√(T ln(1/δ))/(nε)`,
//! added directly to the clipped batch means.
//!
//! PrivateDiff: `σ_{x1} = 4√((R/T) ln(1/δ))/(nε)`, `σ_{x2} = 4√(R ln(1/δ))/(nε)`
//! (multiplied at run time by the round's clipping radius) and
//! `σ_y = 4(2C₀² + βM)√(R ln(1/δ))/(μnε)`.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{verify_budget, AccountantConfig, Mechanism};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("must be > 0, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn log_inv_delta(&self) -> f64 {
        -self.delta.ln()
    }

    fn warn_outside_regime(&self, n: usize) {
        if self.epsilon > 1.0 {
            warn!(
                "epsilon = {} exceeds 1; closed-form calibration is stated for epsilon <= 1",
                self.epsilon
            );
        }
        let n = n as f64;
        if self.delta > 1.0 / (n * n) {
            warn!(
                "delta = {:e} exceeds 1/n^2 = {:e}; closed-form calibration is stated for delta <= 1/n^2",
                self.delta,
                1.0 / (n * n)
            );
        }
    }
}

impl<'de> Deserialize<'de> for PrivacyBudget {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            epsilon: f64,
            delta: f64,
        }
        let raw = Raw::deserialize(d)?;
        PrivacyBudget::new(raw.epsilon, raw.delta).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseScalesSgda {
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl NoiseScalesSgda {
    pub fn validate(&self) -> Result<()> {
        check_scale("sigma_x", self.sigma_x)?;
        check_scale("sigma_y", self.sigma_y)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            sigma_x: self.sigma_x * k,
            sigma_y: self.sigma_y * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseScalesPrivateDiff {
    /// Restart-round multiplier (noise stddev is `sigma_x1 · C₁`).
    pub sigma_x1: f64,
    /// Difference-round multiplier (noise stddev is `sigma_x2 · C_{2,r}`).
    pub sigma_x2: f64,
    pub sigma_y: f64,
}

impl NoiseScalesPrivateDiff {
    pub fn validate(&self) -> Result<()> {
        check_scale("sigma_x1", self.sigma_x1)?;
        check_scale("sigma_x2", self.sigma_x2)?;
        check_scale("sigma_y", self.sigma_y)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            sigma_x1: self.sigma_x1 * k,
            sigma_x2: self.sigma_x2 * k,
            sigma_y: self.sigma_y * k,
        }
    }
}

fn check_scale(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {v}")))
    }
}

fn check_positive_count(name: &'static str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::param(name, "must be >= 1"))
    } else {
        Ok(())
    }
}

fn check_threshold(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {v}")))
    }
}

/// Noise scales for DP-SGDA run for `iterations` updates with clipping
/// thresholds `clip_x` (C₁) and `clip_y` (C₂).
pub fn calibrate_sgda(
    budget: &PrivacyBudget,
    n: usize,
    iterations: usize,
    clip_x: f64,
    clip_y: f64,
) -> Result<NoiseScalesSgda> {
    check_positive_count("n", n)?;
    check_positive_count("iterations", iterations)?;
    check_threshold("clip_x", clip_x)?;
    check_threshold("clip_y", clip_y)?;
    budget.warn_outside_regime(n);
    let base = 8.0 * (iterations as f64 * budget.log_inv_delta()).sqrt() / (n as f64 * budget.epsilon());
    Ok(NoiseScalesSgda {
        sigma_x: clip_x * base,
        sigma_y: clip_y * base,
    })
}

/// Batch size paired with [`calibrate_sgda`]: `max(1, ⌊n√(ε/(4T))⌋)`.
pub fn sgda_batch_size(n: usize, epsilon: f64, iterations: usize) -> usize {
    let m = (n as f64 * (epsilon / (4.0 * iterations.max(1) as f64)).sqrt()).floor();
    (m as usize).clamp(1, n.max(1))
}

/// Noise scales for PrivateDiff Minimax with `rounds` (R) outer rounds,
/// restart interval `restart` (T), inner clipping `clip_y` (C₀), strong
/// concavity `mu`, y-smoothness `beta` and loss bound `loss_bound` (M).
#[allow(clippy::too_many_arguments)]
pub fn calibrate_privatediff(
    budget: &PrivacyBudget,
    n: usize,
    rounds: usize,
    restart: usize,
    clip_y: f64,
    mu: f64,
    beta: f64,
    loss_bound: f64,
) -> Result<NoiseScalesPrivateDiff> {
    check_positive_count("n", n)?;
    check_positive_count("rounds", rounds)?;
    check_positive_count("restart_interval", restart)?;
    if restart > rounds {
        return Err(Error::param(
            "restart_interval",
            format!("must not exceed rounds ({restart} > {rounds})"),
        ));
    }
    if !(mu > 0.0) {
        return Err(Error::param("mu", format!("must be > 0, got {mu}")));
    }
    check_threshold("clip_y", clip_y)?;
    check_threshold("beta", beta)?;
    check_threshold("loss_bound", loss_bound)?;
    budget.warn_outside_regime(n);
    let l = budget.log_inv_delta();
    let ne = n as f64 * budget.epsilon();
    let r = rounds as f64;
    let t = restart as f64;
    Ok(NoiseScalesPrivateDiff {
        sigma_x1: 4.0 * (r / t * l).sqrt() / ne,
        sigma_x2: 4.0 * (r * l).sqrt() / ne,
        sigma_y: 4.0 * (2.0 * clip_y * clip_y + beta * loss_bound) * (r * l).sqrt() / (mu * ne),
    })
}

/// Batch size paired with [`calibrate_privatediff`]: `max(1, ⌊n√(ε/(8T))⌋)`.
pub fn privatediff_batch_size(n: usize, epsilon: f64, restart: usize) -> usize {
    let m = (n as f64 * (epsilon / (8.0 * restart.max(1) as f64)).sqrt()).floor();
    (m as usize).clamp(1, n.max(1))
}

/// Smallest factor `k ≥ 1` such that the schedule with every noise
/// multiplier scaled by `k` passes [`verify_budget`].
///
/// Returns exactly `1.0` when the schedule already passes. Otherwise the
/// factor is found by bisection to a relative precision of `1e-9`, rounding
/// up so that the returned factor always passes.
pub fn certify_scale(schedule: &[Mechanism], budget: &PrivacyBudget, config: &AccountantConfig) -> Result<f64> {
    let passes = |k: f64| -> Result<bool> {
        let scaled: Vec<Mechanism> = schedule.iter().map(|m| m.scaled(k)).collect();
        Ok(verify_budget(&scaled, budget, config)?.passed)
    };
    if passes(1.0)? {
        return Ok(1.0);
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    while !passes(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::param(
                "budget",
                "no finite noise inflation satisfies the accountant (lambda grid too small?)",
            ));
        }
    }
    while (hi - lo) > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
