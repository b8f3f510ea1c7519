use rand::Rng;

use super::clip_or_zero;
use crate::problems::{sample_batch, MinimaxProblem};
use crate::{Error, Result, Vector};

/// Projected clipped mini-batch ascent on `L̂(x, ·)` with step `1/(μi)` at
/// step `i = 1..=iterations`. Returns `y′_{iterations}`.
pub fn minibatch_sga<P, R>(
    problem: &P,
    x: &Vector,
    y0: &Vector,
    iterations: usize,
    clip: f64,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vector>
where
    P: MinimaxProblem + ?Sized,
    R: Rng + ?Sized,
{
    minibatch_sga_observed(problem, x, y0, iterations, clip, batch_size, rng, |_, _| {})
}

/// [`minibatch_sga`] calling `observe(i, y′_i)` after every step.
#[allow(clippy::too_many_arguments)]
pub fn minibatch_sga_observed<P, R, F>(
    problem: &P,
    x: &Vector,
    y0: &Vector,
    iterations: usize,
    clip: f64,
    batch_size: usize,
    rng: &mut R,
    observe: F,
) -> Result<Vector>
where
    P: MinimaxProblem + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(usize, &Vector),
{
    if iterations == 0 {
        return Err(Error::param("inner_iterations", "must be >= 1"));
    }
    run(problem, x, y0, iterations, clip, batch_size, rng, 0, observe).map(|(y, _)| y)
}

/// Core loop; also reports whether clipping was ever active. `round` only
/// labels divergence errors.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run<P, R, F>(
    problem: &P,
    x: &Vector,
    y0: &Vector,
    iterations: usize,
    clip: f64,
    batch_size: usize,
    rng: &mut R,
    round: usize,
    mut observe: F,
) -> Result<(Vector, bool)>
where
    P: MinimaxProblem + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(usize, &Vector),
{
    let mu = problem.constants().mu;
    if !(mu > 0.0) {
        return Err(Error::param("mu", format!("must be > 0, got {mu}")));
    }
    let mut y = y0.clone();
    let mut g = Vector::zeros(problem.dim_y());
    let mut mean = Vector::zeros(problem.dim_y());
    let mut clipped = false;
    for i in 1..=iterations {
        let batch = sample_batch(problem.n(), batch_size, rng)?;
        mean.fill(0.0);
        for &j in &batch {
            problem.grad_y(x, &y, j, &mut g);
            clipped |= clip_or_zero(&mut g, clip)?;
            mean += &g;
        }
        y.axpy(1.0 / (mu * i as f64 * batch.len() as f64), &mean, 1.0);
        problem.project_y(&mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { round, norm: y.norm() });
        }
        observe(i, &y);
    }
    Ok((y, clipped))
}
