use serde::{Deserialize, Serialize};

use super::{
    check_batch, check_positive, check_sigma, clip_or_zero, initial_point, OptimizerOutput, Recorder, RoundRecord,
    Selection,
};
use crate::privacy::{gaussian_perturb_in_place, Mechanism, SubsampledMechanismSpec};
use crate::problems::{sample_batch, MinimaxProblem};
use crate::rng::{self, STREAM_BATCH, STREAM_NOISE_X, STREAM_NOISE_Y, STREAM_SELECT};
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdaConfig {
    /// Number of updates `T`; iterates `x_0..x_T` are kept.
    pub iterations: usize,
    pub batch_size: usize,
    pub eta_x: f64,
    pub eta_y: f64,
    /// `C₁`; `inf` disables clipping.
    pub clip_x: f64,
    /// `C₂`; `inf` disables clipping.
    pub clip_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    #[serde(default)]
    pub seed: u64,
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

impl SgdaConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        check_batch(self.batch_size, n)?;
        check_positive("eta_x", self.eta_x)?;
        check_positive("eta_y", self.eta_y)?;
        check_positive("clip_x", self.clip_x)?;
        check_positive("clip_y", self.clip_y)?;
        check_sigma("sigma_x", self.sigma_x)?;
        check_sigma("sigma_y", self.sigma_y)
    }
}

/// Gaussian mechanisms invoked by a DP-SGDA run: the x and y batch means have
/// sensitivity `2C/m`, so the noise multipliers are `σ·m/(2C)`.
pub fn sgda_mechanisms(config: &SgdaConfig, n: usize) -> Result<Vec<Mechanism>> {
    config.validate(n)?;
    if config.iterations == 0 {
        return Ok(Vec::new());
    }
    let m = config.batch_size;
    let one = |sigma: f64, clip: f64, name: &'static str| -> Result<Mechanism> {
        let z = sigma * m as f64 / (2.0 * clip);
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::param(
                name,
                "accounting needs sigma > 0 and a finite clipping threshold",
            ));
        }
        Ok(if m < n {
            Mechanism::Subsampled(SubsampledMechanismSpec::new(m, n, z, config.iterations)?)
        } else {
            Mechanism::Gaussian {
                noise_multiplier: z,
                invocations: config.iterations,
            }
        })
    };
    Ok(vec![
        one(config.sigma_x, config.clip_x, "sigma_x")?,
        one(config.sigma_y, config.clip_y, "sigma_y")?,
    ])
}

pub fn dp_sgda<P: MinimaxProblem + ?Sized>(problem: &P, config: &SgdaConfig) -> Result<OptimizerOutput> {
    dp_sgda_observed(problem, config, |_| {})
}

/// [`dp_sgda`] calling `observe` on every trace row as it completes.
pub fn dp_sgda_observed<P, F>(problem: &P, config: &SgdaConfig, mut observe: F) -> Result<OptimizerOutput>
where
    P: MinimaxProblem + ?Sized,
    F: FnMut(&RoundRecord),
{
    let n = problem.n();
    config.validate(n)?;
    let mechanisms =
        if config.sigma_x > 0.0 && config.sigma_y > 0.0 && config.clip_x.is_finite() && config.clip_y.is_finite() {
            sgda_mechanisms(config, n)?
        } else {
            Vec::new()
        };
    let mut x = initial_point(&config.x0, problem.dim_x(), "x0")?;
    let mut y = initial_point(&config.y0, problem.dim_y(), "y0")?;
    problem.project_y(&mut y);

    let mut batch_rng = rng::stream(config.seed, STREAM_BATCH);
    let mut nx_rng = rng::stream(config.seed, STREAM_NOISE_X);
    let mut ny_rng = rng::stream(config.seed, STREAM_NOISE_Y);
    let select_rng = rng::stream(config.seed, STREAM_SELECT);
    let mut rec = Recorder::new(
        problem,
        &x,
        config.selection,
        config.metrics,
        config.wallclock,
        0,
        select_rng,
    );
    observe(rec.push(RoundRecord::initial(), &x, &y)?);

    let mut gx = Vector::zeros(problem.dim_x());
    let mut gy = Vector::zeros(problem.dim_y());
    let mut mx = Vector::zeros(problem.dim_x());
    let mut my = Vector::zeros(problem.dim_y());
    for t in 0..config.iterations {
        let batch = sample_batch(n, config.batch_size, &mut batch_rng)?;
        let m = batch.len() as f64;
        mx.fill(0.0);
        my.fill(0.0);
        let mut clipped = false;
        for &j in &batch {
            problem.grad_x(&x, &y, j, &mut gx);
            clipped |= clip_or_zero(&mut gx, config.clip_x)?;
            mx += &gx;
            problem.grad_y(&x, &y, j, &mut gy);
            clipped |= clip_or_zero(&mut gy, config.clip_y)?;
            my += &gy;
        }
        mx /= m;
        my /= m;
        let noise_x_norm = gaussian_perturb_in_place(&mut mx, config.sigma_x, &mut nx_rng)?;
        gaussian_perturb_in_place(&mut my, config.sigma_y, &mut ny_rng)?;
        x.axpy(-config.eta_x, &mx, 1.0);
        y.axpy(config.eta_y, &my, 1.0);
        problem.project_y(&mut y);
        let record = RoundRecord {
            round: t + 1,
            noise_x_norm,
            noise_x_std: config.sigma_x,
            estimator_norm: mx.norm(),
            clipped,
            ..RoundRecord::initial()
        };
        observe(rec.push(record, &x, &y)?);
    }
    rec.finish(mechanisms)
}
