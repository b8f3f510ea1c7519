//! Turning a config plus a built problem into a fully specified run.

use dpminimax::optimizers::{
    c3_constant, privatediff_mechanisms, sgda_mechanisms, suggest_schedule, Algorithm, BatchPairing, PrivateDiffConfig,
    ScheduleDraft, Selection, SgdaConfig,
};
use dpminimax::privacy::{
    calibrate_privatediff, calibrate_sgda, certify_scale, privatediff_batch_size, sgda_batch_size, Mechanism,
};
use dpminimax::MinimaxProblem;
use serde::Serialize;

use crate::config::{AlgorithmKind, ExplicitSchedule, LoadedConfig, NoiseConfig, ScheduleSpec};
use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GdaSettings {
    pub iterations: usize,
    pub eta_x: f64,
    pub eta_y: f64,
    pub metrics: bool,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum ResolvedAlgorithm {
    DpSgda(SgdaConfig),
    Privatediff(PrivateDiffConfig),
    GdaReference(GdaSettings),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedRun {
    pub seed: u64,
    #[serde(flatten)]
    pub algorithm: ResolvedAlgorithm,
    /// Common factor applied to the closed-form noise scales (1 when they
    /// already close, or outside budget mode).
    pub noise_inflation: f64,
    pub mechanisms: Vec<Mechanism>,
}

const SGDA_KEYS: &[&str] = &[
    "iterations",
    "batch_size",
    "eta_x",
    "eta_y",
    "clip_x",
    "clip_y",
    "selection",
    "metrics",
    "wallclock",
    "x0",
    "y0",
];
const PRIVATEDIFF_KEYS: &[&str] = &[
    "rounds",
    "restart_interval",
    "inner_iterations",
    "batch_size",
    "inner_batch_size",
    "eta_x",
    "clip_x",
    "clip_y",
    "c2",
    "c3",
    "pairing",
    "selection",
    "metrics",
    "wallclock",
    "x0",
    "y0",
];
const GDA_KEYS: &[&str] = &["iterations", "eta_x", "eta_y", "metrics", "x0", "y0"];

fn alternating(norm: f64, dim: usize) -> Vec<f64> {
    let s = norm / (dim as f64).sqrt();
    (0..dim).map(|i| if i % 2 == 0 { s } else { -s }).collect()
}

fn check_keys(l: &LoadedConfig, e: &ExplicitSchedule, allowed: &[&str]) -> CliResult<()> {
    for k in e.present_keys() {
        if !allowed.contains(&k) {
            return Err(l.error_at(
                k,
                format!("schedule key `{k}` does not apply to {}", l.config.algorithm),
            ));
        }
    }
    Ok(())
}

fn required<T: Copy>(l: &LoadedConfig, v: Option<T>, key: &str) -> CliResult<T> {
    v.ok_or_else(|| l.error_at("schedule", format!("schedule needs `{key}` for {}", l.config.algorithm)))
}

fn noise_value(l: &LoadedConfig, v: Option<f64>, key: &str) -> CliResult<f64> {
    v.ok_or_else(|| l.error_at("noise", format!("[noise] needs `{key}` for {}", l.config.algorithm)))
}

fn check_noise_keys(l: &LoadedConfig, n: &NoiseConfig) -> CliResult<()> {
    let bad = match l.config.algorithm {
        AlgorithmKind::DpSgda => vec![("sigma_x1", n.sigma_x1.is_some()), ("sigma_x2", n.sigma_x2.is_some())],
        AlgorithmKind::Privatediff => vec![("sigma_x", n.sigma_x.is_some())],
        AlgorithmKind::GdaReference => Vec::new(),
    };
    for (k, set) in bad {
        if set {
            return Err(l.error_at(k, format!("[noise] key `{k}` does not apply to {}", l.config.algorithm)));
        }
    }
    Ok(())
}

/// Resolves hyperparameters, calibrates or accepts noise and certifies the
/// budget for one seed.
pub fn resolve_run(l: &LoadedConfig, problem: &dyn MinimaxProblem, seed: u64) -> CliResult<ResolvedRun> {
    let c = &l.config;
    let n = problem.n();
    let dim = problem.dim_x();
    let constants = *problem.constants();
    let x0_default = c.x0_norm.map(|r| alternating(r, dim));
    let acc = c.accountant.config();

    let mut algorithm = match (&c.schedule, c.algorithm) {
        (ScheduleSpec::Theory, kind) => {
            let budget = c.budget.expect("checked at load");
            let alg = match kind {
                AlgorithmKind::DpSgda => Algorithm::DpSgda,
                _ => Algorithm::PrivateDiff,
            };
            match suggest_schedule(&constants, n, dim, &budget, alg).map_err(|e| l.error_at("schedule", e))? {
                ScheduleDraft::DpSgda(mut s) => {
                    s.x0 = x0_default.clone();
                    ResolvedAlgorithm::DpSgda(s)
                }
                ScheduleDraft::PrivateDiff(mut s) => {
                    s.x0 = x0_default.clone();
                    ResolvedAlgorithm::Privatediff(s)
                }
            }
        }
        (ScheduleSpec::Explicit(e), AlgorithmKind::DpSgda) => {
            check_keys(l, e, SGDA_KEYS)?;
            let iterations = required(l, e.iterations, "iterations")?;
            let clip_x = e.clip_x.unwrap_or(constants.g_x);
            let clip_y = e.clip_y.unwrap_or(constants.g_y);
            let batch_size = match (e.batch_size, &c.budget) {
                (Some(m), _) => m,
                (None, Some(b)) => sgda_batch_size(n, b.epsilon(), iterations),
                (None, None) => n,
            };
            let (sigma_x, sigma_y) = match (&c.budget, &c.noise) {
                (Some(b), _) => {
                    let s =
                        calibrate_sgda(b, n, iterations.max(1), clip_x, clip_y).map_err(|e| l.error_at("budget", e))?;
                    (s.sigma_x, s.sigma_y)
                }
                (None, Some(nz)) => {
                    check_noise_keys(l, nz)?;
                    (
                        noise_value(l, nz.sigma_x, "sigma_x")?,
                        noise_value(l, nz.sigma_y, "sigma_y")?,
                    )
                }
                (None, None) => unreachable!("checked at load"),
            };
            ResolvedAlgorithm::DpSgda(SgdaConfig {
                iterations,
                batch_size,
                eta_x: required(l, e.eta_x, "eta_x")?,
                eta_y: required(l, e.eta_y, "eta_y")?,
                clip_x,
                clip_y,
                sigma_x,
                sigma_y,
                seed,
                selection: e.selection.unwrap_or(Selection::Stored),
                metrics: e.metrics.unwrap_or(true),
                wallclock: e.wallclock.unwrap_or(false),
                x0: e.x0.clone().or_else(|| x0_default.clone()),
                y0: e.y0.clone(),
            })
        }
        (ScheduleSpec::Explicit(e), AlgorithmKind::Privatediff) => {
            check_keys(l, e, PRIVATEDIFF_KEYS)?;
            let rounds = required(l, e.rounds, "rounds")?;
            let restart = required(l, e.restart_interval, "restart_interval")?;
            let inner = required(l, e.inner_iterations, "inner_iterations")?;
            let clip_y = e.clip_y.unwrap_or(constants.g_y);
            let batch_size = match (e.batch_size, &c.budget) {
                (Some(m), _) => m,
                (None, Some(b)) => privatediff_batch_size(n, b.epsilon(), restart),
                (None, None) => n,
            };
            let (sigma_x1, sigma_x2, sigma_y) = match (&c.budget, &c.noise) {
                (Some(b), _) => {
                    let s = calibrate_privatediff(
                        b,
                        n,
                        rounds,
                        restart,
                        clip_y,
                        constants.mu,
                        constants.l_y,
                        constants.loss_bound,
                    )
                    .map_err(|e| l.error_at("budget", e))?;
                    (s.sigma_x1, s.sigma_x2, s.sigma_y)
                }
                (None, Some(nz)) => {
                    check_noise_keys(l, nz)?;
                    (
                        noise_value(l, nz.sigma_x1, "sigma_x1")?,
                        noise_value(l, nz.sigma_x2, "sigma_x2")?,
                        noise_value(l, nz.sigma_y, "sigma_y")?,
                    )
                }
                (None, None) => unreachable!("checked at load"),
            };
            ResolvedAlgorithm::Privatediff(PrivateDiffConfig {
                rounds,
                restart_interval: restart,
                inner_iterations: inner,
                batch_size,
                inner_batch_size: e.inner_batch_size,
                eta_x: required(l, e.eta_x, "eta_x")?,
                clip_y,
                clip_x: e.clip_x.unwrap_or(constants.g_x),
                c2: e.c2.unwrap_or_else(|| constants.phi_smoothness()),
                c3: e.c3.unwrap_or_else(|| c3_constant(&constants, rounds, inner)),
                sigma_x1,
                sigma_x2,
                sigma_y,
                seed,
                pairing: e.pairing.unwrap_or(BatchPairing::RetainedBatch),
                selection: e.selection.unwrap_or(Selection::Stored),
                metrics: e.metrics.unwrap_or(true),
                wallclock: e.wallclock.unwrap_or(false),
                x0: e.x0.clone().or_else(|| x0_default.clone()),
                y0: e.y0.clone(),
            })
        }
        (ScheduleSpec::Explicit(e), AlgorithmKind::GdaReference) => {
            check_keys(l, e, GDA_KEYS)?;
            ResolvedAlgorithm::GdaReference(GdaSettings {
                iterations: required(l, e.iterations, "iterations")?,
                eta_x: required(l, e.eta_x, "eta_x")?,
                eta_y: required(l, e.eta_y, "eta_y")?,
                metrics: e.metrics.unwrap_or(true),
                x0: e.x0.clone().or_else(|| x0_default.clone()),
                y0: e.y0.clone(),
            })
        }
    };

    let mut inflation = 1.0;
    let mechanisms = match &mut algorithm {
        ResolvedAlgorithm::DpSgda(s) => {
            s.seed = seed;
            s.validate(n).map_err(|e| l.error_at("schedule", e))?;
            let private = s.sigma_x > 0.0 && s.sigma_y > 0.0 && s.iterations > 0;
            if c.budget.is_some() && !(s.clip_x.is_finite() && s.clip_y.is_finite()) {
                return Err(l.error_at("clip_x", "budget mode needs finite clipping thresholds"));
            }
            if private && s.clip_x.is_finite() && s.clip_y.is_finite() {
                let mut mech = sgda_mechanisms(s, n)?;
                if let (Some(b), true) = (&c.budget, c.accountant.inflate) {
                    inflation = certify_scale(&mech, b, &acc).map_err(|e| l.error_at("budget", e))?;
                    s.sigma_x *= inflation;
                    s.sigma_y *= inflation;
                    mech = sgda_mechanisms(s, n)?;
                }
                mech
            } else {
                Vec::new()
            }
        }
        ResolvedAlgorithm::Privatediff(s) => {
            s.seed = seed;
            s.validate(n).map_err(|e| l.error_at("schedule", e))?;
            let private = s.sigma_x1 > 0.0 && s.sigma_x2 > 0.0 && s.sigma_y > 0.0;
            if c.budget.is_some() && !(s.clip_x.is_finite() && s.clip_y.is_finite()) {
                return Err(l.error_at("clip_x", "budget mode needs finite clipping thresholds"));
            }
            if private && s.clip_y.is_finite() {
                let mut mech = privatediff_mechanisms(s, n, &constants)?;
                if let (Some(b), true) = (&c.budget, c.accountant.inflate) {
                    inflation = certify_scale(&mech, b, &acc).map_err(|e| l.error_at("budget", e))?;
                    s.sigma_x1 *= inflation;
                    s.sigma_x2 *= inflation;
                    s.sigma_y *= inflation;
                    mech = privatediff_mechanisms(s, n, &constants)?;
                }
                mech
            } else {
                Vec::new()
            }
        }
        ResolvedAlgorithm::GdaReference(g) => {
            for (k, v) in [("x0", &g.x0), ("y0", &g.y0)] {
                let want = if k == "x0" { dim } else { problem.dim_y() };
                if let Some(v) = v {
                    if v.len() != want {
                        return Err(l.error_at(k, format!("{k} has length {}, expected {want}", v.len())));
                    }
                }
            }
            Vec::new()
        }
    };
    Ok(ResolvedRun {
        seed,
        algorithm,
        noise_inflation: inflation,
        mechanisms,
    })
}
