use serde::{Deserialize, Serialize};

use super::{
    check_batch, check_positive, check_sigma, clip_or_zero, initial_point, sga, OptimizerOutput, Recorder, RoundRecord,
    Selection,
};
use crate::privacy::{gaussian_perturb_in_place, Mechanism, SubsampledMechanismSpec};
use crate::problems::{sample_batch, MinimaxProblem, ProblemConstants};
use crate::rng::{self, STREAM_BATCH, STREAM_INNER_BATCH, STREAM_NOISE_X, STREAM_NOISE_Y, STREAM_SELECT};
use crate::{Error, Result, Vector};

/// Which samples the subtrahend `∇ₓf(x_{r−1}, y_r; ·)` of a difference round
/// is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchPairing {
    /// Position `j` of the previous round's batch.
    #[default]
    RetainedBatch,
    /// The current round's sample `j` at both points.
    SharedBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivateDiffConfig {
    /// Outer rounds `R`; iterates `x_1..x_R` are selectable.
    pub rounds: usize,
    /// Restart interval `T`.
    pub restart_interval: usize,
    /// Inner ascent steps `T₂`.
    pub inner_iterations: usize,
    pub batch_size: usize,
    /// Batch size of the inner ascent; defaults to `batch_size`.
    #[serde(default)]
    pub inner_batch_size: Option<usize>,
    pub eta_x: f64,
    /// `C₀`, inner ascent clipping.
    pub clip_y: f64,
    /// `C₁`, restart-round clipping.
    pub clip_x: f64,
    /// `C₂`, slope of the difference-round radius.
    pub c2: f64,
    /// `C₃`, offset of the difference-round radius.
    pub c3: f64,
    pub sigma_x1: f64,
    pub sigma_x2: f64,
    pub sigma_y: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pairing: BatchPairing,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default = "yes")]
    pub metrics: bool,
    #[serde(default)]
    pub wallclock: bool,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
}

fn yes() -> bool {
    true
}

impl PrivateDiffConfig {
    pub fn inner_batch(&self) -> usize {
        self.inner_batch_size.unwrap_or(self.batch_size)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::param("rounds", "must be >= 1"));
        }
        if self.restart_interval == 0 || self.restart_interval > self.rounds {
            return Err(Error::param(
                "restart_interval",
                format!(
                    "must lie in 1..=rounds ({}), got {}",
                    self.rounds, self.restart_interval
                ),
            ));
        }
        if self.inner_iterations == 0 {
            return Err(Error::param("inner_iterations", "must be >= 1"));
        }
        check_batch(self.batch_size, n)?;
        check_batch(self.inner_batch(), n)?;
        check_positive("eta_x", self.eta_x)?;
        check_positive("clip_y", self.clip_y)?;
        check_positive("clip_x", self.clip_x)?;
        if !(self.c2 >= 0.0) || !(self.c3 >= 0.0) {
            return Err(Error::param("c2/c3", "must be >= 0"));
        }
        check_sigma("sigma_x1", self.sigma_x1)?;
        check_sigma("sigma_x2", self.sigma_x2)?;
        check_sigma("sigma_y", self.sigma_y)
    }

    /// Rounds with `r % T = 0` among `r = 0..R`.
    pub fn restart_rounds(&self) -> usize {
        self.rounds.div_ceil(self.restart_interval)
    }
}

/// Gaussian mechanisms invoked by a PrivateDiff run.
///
/// The x-noise stddev is `σ·C` for a batch mean of sensitivity `2C/m`, giving
/// the multiplier `σm/2` on both restart and difference rounds. The released
/// `ỹ` has sensitivity `(2C₀² + βM)/(μn)` with `β = l_y`.
pub fn privatediff_mechanisms(
    config: &PrivateDiffConfig,
    n: usize,
    constants: &ProblemConstants,
) -> Result<Vec<Mechanism>> {
    config.validate(n)?;
    let m = config.batch_size;
    let x_mech = |sigma: f64, invocations: usize, name: &'static str| -> Result<Option<Mechanism>> {
        if invocations == 0 {
            return Ok(None);
        }
        let z = sigma * m as f64 / 2.0;
        if !(z > 0.0) {
            return Err(Error::param(name, "accounting needs sigma > 0"));
        }
        Ok(Some(if m < n {
            Mechanism::Subsampled(SubsampledMechanismSpec::new(m, n, z, invocations)?)
        } else {
            Mechanism::Gaussian {
                noise_multiplier: z,
                invocations,
            }
        }))
    };
    let restarts = config.restart_rounds();
    let mut out = Vec::with_capacity(3);
    out.extend(x_mech(config.sigma_x1, restarts, "sigma_x1")?);
    out.extend(x_mech(config.sigma_x2, config.rounds - restarts, "sigma_x2")?);
    let sensitivity =
        (2.0 * config.clip_y * config.clip_y + constants.l_y * constants.loss_bound) / (constants.mu * n as f64);
    let z = config.sigma_y / sensitivity;
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::param(
            "sigma_y",
            "accounting needs sigma_y > 0 and a finite clipping threshold",
        ));
    }
    out.push(Mechanism::Gaussian {
        noise_multiplier: z,
        invocations: config.rounds,
    });
    Ok(out)
}

pub fn privatediff_minimax<P: MinimaxProblem + ?Sized>(
    problem: &P,
    config: &PrivateDiffConfig,
) -> Result<OptimizerOutput> {
    privatediff_minimax_observed(problem, config, |_| {})
}

/// [`privatediff_minimax`] calling `observe` on every trace row as it
/// completes.
pub fn privatediff_minimax_observed<P, F>(
    problem: &P,
    config: &PrivateDiffConfig,
    mut observe: F,
) -> Result<OptimizerOutput>
where
    P: MinimaxProblem + ?Sized,
    F: FnMut(&RoundRecord),
{
    let n = problem.n();
    config.validate(n)?;
    let private = config.sigma_x1 > 0.0 && config.sigma_x2 > 0.0 && config.sigma_y > 0.0 && config.clip_y.is_finite();
    let mechanisms = if private {
        privatediff_mechanisms(config, n, problem.constants())?
    } else {
        Vec::new()
    };
    let mut x = initial_point(&config.x0, problem.dim_x(), "x0")?;
    // ỹ_r: the released y, also the start of the next inner ascent
    let mut y_tilde = initial_point(&config.y0, problem.dim_y(), "y0")?;
    problem.project_y(&mut y_tilde);

    let mut batch_rng = rng::stream(config.seed, STREAM_BATCH);
    let mut inner_rng = rng::stream(config.seed, STREAM_INNER_BATCH);
    let mut nx_rng = rng::stream(config.seed, STREAM_NOISE_X);
    let mut ny_rng = rng::stream(config.seed, STREAM_NOISE_Y);
    let select_rng = rng::stream(config.seed, STREAM_SELECT);
    let mut rec = Recorder::new(
        problem,
        &x,
        config.selection,
        config.metrics,
        config.wallclock,
        1,
        select_rng,
    );
    observe(rec.push(RoundRecord::initial(), &x, &y_tilde)?);

    let dx = problem.dim_x();
    let mut v_tilde = Vector::zeros(dx);
    let mut g = Vector::zeros(dx);
    let mut g_prev = Vector::zeros(dx);
    let mut d = Vector::zeros(dx);
    // (x_{r−1}, clean ascent output y_r, batch_{r−1})
    let mut prev: Option<(Vector, Vector, Vec<usize>)> = None;
    for r in 0..config.rounds {
        let batch = sample_batch(n, config.batch_size, &mut batch_rng)?;
        let (y_next, mut clipped) = sga::run(
            problem,
            &x,
            &y_tilde,
            config.inner_iterations,
            config.clip_y,
            config.inner_batch(),
            &mut inner_rng,
            r,
            |_, _| {},
        )?;
        let m = batch.len() as f64;
        d.fill(0.0);
        let (sigma, radius, c2r) = match (&prev, r % config.restart_interval == 0) {
            (Some((x_prev, y_prev, batch_prev)), false) => {
                let c2r = config.c2 * (&x - x_prev).norm() + config.c3;
                for (pos, &j) in batch.iter().enumerate() {
                    let k = match config.pairing {
                        BatchPairing::RetainedBatch => batch_prev[pos],
                        BatchPairing::SharedBatch => j,
                    };
                    problem.grad_x(&x, &y_next, j, &mut g);
                    problem.grad_x(x_prev, y_prev, k, &mut g_prev);
                    g -= &g_prev;
                    clipped |= clip_or_zero(&mut g, c2r)?;
                    d += &g;
                }
                (config.sigma_x2, c2r, Some(c2r))
            }
            _ => {
                for &j in &batch {
                    problem.grad_x(&x, &y_next, j, &mut g);
                    clipped |= clip_or_zero(&mut g, config.clip_x)?;
                    d += &g;
                }
                v_tilde.fill(0.0);
                (config.sigma_x1, config.clip_x, None)
            }
        };
        d /= m;
        v_tilde += &d;
        let std = if sigma == 0.0 { 0.0 } else { sigma * radius };
        let noise_x_norm = gaussian_perturb_in_place(&mut v_tilde, std, &mut nx_rng)?;
        let x_prev = x.clone();
        x.axpy(-config.eta_x, &v_tilde, 1.0);
        y_tilde.copy_from(&y_next);
        gaussian_perturb_in_place(&mut y_tilde, config.sigma_y, &mut ny_rng)?;
        let record = RoundRecord {
            round: r + 1,
            noise_x_norm,
            noise_x_std: std,
            c2r,
            estimator_norm: v_tilde.norm(),
            clipped,
            ..RoundRecord::initial()
        };
        observe(rec.push(record, &x, &y_tilde)?);
        prev = Some((x_prev, y_next, batch));
    }
    rec.finish(mechanisms)
}
