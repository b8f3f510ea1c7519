//! Theory-driven hyperparameter drafts with every hidden constant set to 1.

use serde::{Deserialize, Serialize};

use super::{BatchPairing, PrivateDiffConfig, Selection, SgdaConfig};
use crate::privacy::{calibrate_privatediff, calibrate_sgda, privatediff_batch_size, PrivacyBudget};
use crate::problems::ProblemConstants;
use crate::{Error, Result};

/// Failure probability `ϑ` inside the `C₃` log factor.
pub const FAILURE_PROBABILITY: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    DpSgda,
    PrivateDiff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum ScheduleDraft {
    DpSgda(SgdaConfig),
    PrivateDiff(PrivateDiffConfig),
}

fn check(constants: &ProblemConstants, n: usize, dim: usize) -> Result<()> {
    if n == 0 || dim == 0 {
        return Err(Error::param("n/dim", "must be >= 1"));
    }
    let all = [constants.g_x, constants.g_y, constants.l(), constants.mu];
    if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::param(
            "constants",
            "G_x, G_y, l and mu must be positive and finite",
        ));
    }
    Ok(())
}

/// `T = round(nε/√(d ln(1/δ)))`, `m = T` (clamped to `1..=n`),
/// `η_x = 1/(16(κ+1)²l)`, `η_y = 1/l`, `C₁ = G_x`, `C₂ = G_y`.
pub fn suggest_sgda(constants: &ProblemConstants, n: usize, dim: usize, budget: &PrivacyBudget) -> Result<SgdaConfig> {
    check(constants, n, dim)?;
    let ne = n as f64 * budget.epsilon();
    let t = ((ne / (dim as f64 * -budget.delta().ln()).sqrt()).round() as usize).max(1);
    let l = constants.l();
    let kappa = constants.kappa();
    let scales = calibrate_sgda(budget, n, t, constants.g_x, constants.g_y)?;
    Ok(SgdaConfig {
        iterations: t,
        batch_size: t.clamp(1, n),
        eta_x: 1.0 / (16.0 * (kappa + 1.0).powi(2) * l),
        eta_y: 1.0 / l,
        clip_x: constants.g_x,
        clip_y: constants.g_y,
        sigma_x: scales.sigma_x,
        sigma_y: scales.sigma_y,
        seed: 0,
        selection: Selection::Stored,
        metrics: true,
        wallclock: false,
        x0: None,
        y0: None,
    })
}

/// `C₃ = 50κG√((ln(R·ln T₂/ϑ) + 1)/T₂)`, with `ln T₂` floored at 1 so the
/// log factor stays defined for tiny `T₂`.
pub fn c3_constant(constants: &ProblemConstants, rounds: usize, inner: usize) -> f64 {
    let log_t2 = (inner as f64).ln().max(1.0);
    let inner_log = (rounds as f64 * log_t2 / FAILURE_PROBABILITY).ln().max(0.0);
    50.0 * constants.kappa() * constants.g() * ((inner_log + 1.0) / inner as f64).sqrt()
}

/// `ε_opt = d^{2/3}/(nε)^{4/3}`, `R = max(1/ε_opt, d/((nε)²ε_opt²))`,
/// `T = (√d/(nε))^{2/3}·R`, `T₂ = max((nε)^{4/3}/d^{2/3}, T·R·d^{1/3}/(nε)^{2/3})`,
/// `η_x = min{1/(l+κl), 1/(√T·l·σ_{x2}·√d)}`, `C₀ = G_y`, `C₁ = G_x`,
/// `C₂ = l + κl`. The batch size pairs with the noise calibration.
pub fn suggest_privatediff(
    constants: &ProblemConstants,
    n: usize,
    dim: usize,
    budget: &PrivacyBudget,
) -> Result<PrivateDiffConfig> {
    check(constants, n, dim)?;
    let d = dim as f64;
    let ne = n as f64 * budget.epsilon();
    let eps_opt = d.powf(2.0 / 3.0) / ne.powf(4.0 / 3.0);
    let rounds = (1.0 / eps_opt).max(d / (ne * ne * eps_opt * eps_opt)).ceil().max(1.0) as usize;
    let ratio = (d.sqrt() / ne).powf(2.0 / 3.0);
    let restart = ((ratio * rounds as f64).round() as usize).clamp(1, rounds);
    let inner = (ne.powf(4.0 / 3.0) / d.powf(2.0 / 3.0))
        .max(restart as f64 * rounds as f64 * d.powf(1.0 / 3.0) / ne.powf(2.0 / 3.0))
        .ceil()
        .max(1.0) as usize;
    let l = constants.l();
    let phi_l = constants.phi_smoothness();
    let scales = calibrate_privatediff(
        budget,
        n,
        rounds,
        restart,
        constants.g_y,
        constants.mu,
        constants.l_y,
        constants.loss_bound,
    )?;
    let eta_x = (1.0 / phi_l).min(1.0 / ((restart as f64).sqrt() * l * scales.sigma_x2 * d.sqrt()));
    Ok(PrivateDiffConfig {
        rounds,
        restart_interval: restart,
        inner_iterations: inner,
        batch_size: privatediff_batch_size(n, budget.epsilon(), restart),
        inner_batch_size: None,
        eta_x,
        clip_y: constants.g_y,
        clip_x: constants.g_x,
        c2: phi_l,
        c3: c3_constant(constants, rounds, inner),
        sigma_x1: scales.sigma_x1,
        sigma_x2: scales.sigma_x2,
        sigma_y: scales.sigma_y,
        seed: 0,
        pairing: BatchPairing::RetainedBatch,
        selection: Selection::Stored,
        metrics: true,
        wallclock: false,
        x0: None,
        y0: None,
    })
}

/// Draft for either algorithm; `dim` is the x-dimension `d₁`.
pub fn suggest_schedule(
    constants: &ProblemConstants,
    n: usize,
    dim: usize,
    budget: &PrivacyBudget,
    algorithm: Algorithm,
) -> Result<ScheduleDraft> {
    Ok(match algorithm {
        Algorithm::DpSgda => ScheduleDraft::DpSgda(suggest_sgda(constants, n, dim, budget)?),
        Algorithm::PrivateDiff => ScheduleDraft::PrivateDiff(suggest_privatediff(constants, n, dim, budget)?),
    })
}
