use crate::problems::MinimaxProblem;
use crate::{Error, Result, Vector};

/// Deterministic full-batch simultaneous projected GDA. Returns the iterates
/// `(x_0, y_0)..(x_T, y_T)`.
pub fn gda_reference<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x0: &Vector,
    y0: &Vector,
    iterations: usize,
    eta_x: f64,
    eta_y: f64,
) -> Result<Vec<(Vector, Vector)>> {
    if x0.len() != problem.dim_x() || y0.len() != problem.dim_y() {
        return Err(Error::LengthMismatch("initial point dimensions".into()));
    }
    let mut x = x0.clone();
    let mut y = y0.clone();
    problem.project_y(&mut y);
    let mut out = Vec::with_capacity(iterations + 1);
    out.push((x.clone(), y.clone()));
    for t in 0..iterations {
        let gx = problem.full_grad_x(&x, &y);
        let gy = problem.full_grad_y(&x, &y);
        x -= gx * eta_x;
        y += gy * eta_y;
        problem.project_y(&mut y);
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                round: t + 1,
                norm: x.norm(),
            });
        }
        out.push((x.clone(), y.clone()));
    }
    Ok(out)
}
