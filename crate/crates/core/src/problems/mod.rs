//! Minimax problems `min_x max_{y∈𝒴} (1/n) Σᵢ f(x, y; zᵢ)`.
//!
//! A problem exposes per-sample losses and gradients, the Euclidean
//! projection onto its feasible set `𝒴` and the declared regularity
//! constants the optimizers and calibrations need. Families whose inner
//! maximizer `y*(x)` can be computed exactly also implement
//! [`MinimaxProblem::inner_maximizer`], which gives `Φ(x)` and `∇Φ(x)` via
//! `∇Φ(x) = ∇ₓL̂(x, y*(x))`.

pub mod auc;
pub mod quadratic;
mod sampling;
mod simplex;
pub mod td;
pub mod worst_group;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vector};

pub use auc::{auc_score, load_auc_csv, make_auc, AucProblem, AucSample, AucSyntheticSpec, DEFAULT_ALPHA_BOUND};
pub use quadratic::{make_quadratic, QuadraticNcscSpec, QuadraticProblem, QuadraticSample};
pub use sampling::sample_batch;
pub use simplex::project_simplex;
pub use td::{make_td, stationary_distribution, RandomMdpSpec, TabularMdpSpec, TdProblem, Transition};
pub use worst_group::{make_worst_group, WorstGroupProblem, WorstGroupSample, WorstGroupSpec};

/// Declared regularity constants of a problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Per-sample Lipschitz constant of `f(·, y; z)`.
    pub g_x: f64,
    /// Per-sample Lipschitz constant of `f(x, ·; z)`.
    pub g_y: f64,
    /// Smoothness of `L̂(·, y)`.
    pub l_x: f64,
    /// Smoothness of `L̂(x, ·)`.
    pub l_y: f64,
    /// Bound on the cross block `‖∇²_{xy} L̂‖₂`.
    pub l_xy: f64,
    /// Strong concavity of `L̂(x, ·)`.
    pub mu: f64,
    /// Bound on `|f|` over the declared domain.
    pub loss_bound: f64,
    /// Diameter of `𝒴`.
    pub diameter: f64,
}

impl ProblemConstants {
    pub fn l(&self) -> f64 {
        self.l_x.max(self.l_y).max(self.l_xy)
    }

    pub fn kappa(&self) -> f64 {
        self.l() / self.mu
    }

    pub fn g(&self) -> f64 {
        self.g_x.max(self.g_y)
    }

    /// Smoothness of `Φ`, `l + κl`.
    pub fn phi_smoothness(&self) -> f64 {
        self.l() * (1.0 + self.kappa())
    }
}

pub trait MinimaxProblem: Send + Sync {
    fn name(&self) -> &'static str;
    fn n(&self) -> usize;
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn constants(&self) -> &ProblemConstants;

    fn loss(&self, x: &Vector, y: &Vector, i: usize) -> f64;
    /// Writes `∇ₓ f(x, y; zᵢ)` into `out` (length `dim_x`).
    fn grad_x(&self, x: &Vector, y: &Vector, i: usize, out: &mut Vector);
    /// Writes `∇_y f(x, y; zᵢ)` into `out` (length `dim_y`).
    fn grad_y(&self, x: &Vector, y: &Vector, i: usize, out: &mut Vector);
    /// Euclidean projection onto `𝒴`, in place.
    fn project_y(&self, y: &mut Vector);

    /// Exact `y*(x) = argmax_{y∈𝒴} L̂(x, y)` when the family admits one.
    fn inner_maximizer(&self, _x: &Vector) -> Option<Vector> {
        None
    }

    fn full_loss(&self, x: &Vector, y: &Vector) -> f64 {
        let n = self.n();
        (0..n).map(|i| self.loss(x, y, i)).sum::<f64>() / n as f64
    }

    fn full_grad_x(&self, x: &Vector, y: &Vector) -> Vector {
        let mut acc = Vector::zeros(self.dim_x());
        let mut g = Vector::zeros(self.dim_x());
        for i in 0..self.n() {
            self.grad_x(x, y, i, &mut g);
            acc += &g;
        }
        acc / self.n() as f64
    }

    fn full_grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        let mut acc = Vector::zeros(self.dim_y());
        let mut g = Vector::zeros(self.dim_y());
        for i in 0..self.n() {
            self.grad_y(x, y, i, &mut g);
            acc += &g;
        }
        acc / self.n() as f64
    }
}

/// Projection returning a new vector.
pub fn projected<P: MinimaxProblem + ?Sized>(problem: &P, y: &Vector) -> Vector {
    let mut out = y.clone();
    problem.project_y(&mut out);
    out
}

/// `(Φ(x), ∇Φ(x))` from the family's closed-form inner maximizer.
pub fn analytic_phi_grad<P: MinimaxProblem + ?Sized>(problem: &P, x: &Vector) -> Result<(f64, Vector)> {
    let y = problem.inner_maximizer(x).ok_or(Error::NoClosedForm(problem.name()))?;
    Ok((problem.full_loss(x, &y), problem.full_grad_x(x, &y)))
}

/// Projection of `v` onto the closed Euclidean ball of radius `r` at the origin.
pub(crate) fn project_ball(v: &mut Vector, r: f64) {
    let norm = v.norm();
    if norm > r {
        *v *= r / norm;
    }
}

pub(crate) fn spectral_norm(m: &nalgebra::DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

#[cfg(test)]
pub(crate) mod testutil {
    //! Finite-difference and concavity checks shared by the family tests.
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub fn random_vector<R: Rng>(dim: usize, scale: f64, rng: &mut R) -> Vector {
        Vector::from_iterator(dim, (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)))
    }

    /// Central differences of `L̂` against the averaged analytic gradients.
    /// Returns the worst relative error over both blocks.
    pub fn fd_gradient_error<P: MinimaxProblem + ?Sized>(p: &P, x: &Vector, y: &Vector, h: f64) -> f64 {
        let gx = p.full_grad_x(x, y);
        let gy = p.full_grad_y(x, y);
        let mut fx = Vector::zeros(x.len());
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            fx[k] = (p.full_loss(&xp, y) - p.full_loss(&xm, y)) / (2.0 * h);
        }
        let mut fy = Vector::zeros(y.len());
        for k in 0..y.len() {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[k] += h;
            ym[k] -= h;
            fy[k] = (p.full_loss(x, &yp) - p.full_loss(x, &ym)) / (2.0 * h);
        }
        let rel = |a: &Vector, b: &Vector| (a - b).norm() / a.norm().max(b.norm()).max(1e-8);
        rel(&gx, &fx).max(rel(&gy, &fy))
    }

    /// `⟨∇_y L̂(x,y₁) − ∇_y L̂(x,y₂), y₁−y₂⟩ + μ‖y₁−y₂‖²`, which must be ≤ 0.
    pub fn concavity_gap<P: MinimaxProblem + ?Sized>(p: &P, x: &Vector, y1: &Vector, y2: &Vector) -> f64 {
        let d = y1 - y2;
        let g = p.full_grad_y(x, y1) - p.full_grad_y(x, y2);
        g.dot(&d) + p.constants().mu * d.norm_squared()
    }
}
