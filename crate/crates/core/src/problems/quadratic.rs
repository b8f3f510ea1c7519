//! Synthetic nonconvex-strongly-concave instance with closed-form `Φ`.
//!
//! `f(x, y; zᵢ) = s·sin(wᵢᵀx + aᵢ) + (ρ/2)‖x‖² + xᵀAᵢy − (μ/2)‖y‖²` over the
//! ball `‖y‖ ≤ Λ/2`. The inner maximizer is `y*(x) = Π(Āᵀx/μ)` with
//! `Ā = (1/n)ΣAᵢ`, since the y-part is an isotropic concave quadratic.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::{project_ball, spectral_norm, MinimaxProblem, ProblemConstants};
use crate::{Error, Result, Vector};

/// One data point `zᵢ = (wᵢ, Aᵢ, aᵢ)`; `aᵢ` is the phase of the sine term.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSample {
    pub w: Vector,
    pub coupling: DMatrix<f64>,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadraticNcscSpec {
    pub n: usize,
    pub dim_x: usize,
    pub dim_y: usize,
    /// Weight `s` of the nonconvex sine term.
    pub nonconvex_weight: f64,
    /// Ridge `ρ`.
    pub ridge: f64,
    pub mu: f64,
    /// Diameter `Λ` of the y-ball.
    pub diameter: f64,
    /// Radius of the x-region the declared constants are valid on.
    pub x_radius: f64,
    /// Spectral scale of the mean coupling `Ā`.
    pub coupling_scale: f64,
    /// Per-sample perturbation scale of `Aᵢ` around `Ā`.
    pub coupling_spread: f64,
    /// Typical norm of `wᵢ`.
    pub w_scale: f64,
}

impl Default for QuadraticNcscSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            dim_x: 10,
            dim_y: 5,
            nonconvex_weight: 1.0,
            ridge: 0.1,
            mu: 1.0,
            diameter: 10.0,
            x_radius: 10.0,
            coupling_scale: 1.0,
            coupling_spread: 0.5,
            w_scale: 1.0,
        }
    }
}

impl QuadraticNcscSpec {
    fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::param("mu", format!("must be > 0, got {}", self.mu)));
        }
        if self.n == 0 {
            return Err(Error::param("n", "must be >= 1"));
        }
        if self.dim_x == 0 || self.dim_y == 0 {
            return Err(Error::param("dim", "dimensions must be >= 1"));
        }
        if !(self.diameter > 0.0) {
            return Err(Error::param("diameter", "must be > 0"));
        }
        if !(self.ridge >= 0.0) || !(self.x_radius > 0.0) {
            return Err(Error::param("ridge/x_radius", "ridge must be >= 0 and x_radius > 0"));
        }
        Ok(())
    }

    /// Draws one sample around the mean coupling `mean`.
    pub fn draw_sample<R: Rng + ?Sized>(&self, mean: &DMatrix<f64>, rng: &mut R) -> QuadraticSample {
        let scale = self.w_scale / (self.dim_x as f64).sqrt();
        let w = Vector::from_iterator(
            self.dim_x,
            (0..self.dim_x).map(|_| scale * rng.sample::<f64, _>(StandardNormal)),
        );
        let spread = self.coupling_spread / (self.dim_x.max(self.dim_y) as f64).sqrt();
        let noise = DMatrix::from_fn(self.dim_x, self.dim_y, |_, _| {
            spread * rng.sample::<f64, _>(StandardNormal)
        });
        let phase = rng.sample(Uniform::new(0.0, std::f64::consts::TAU).unwrap());
        QuadraticSample {
            w,
            coupling: mean + noise,
            phase,
        }
    }

    /// Draws the mean coupling `Ā` with spectral norm `coupling_scale`.
    pub fn draw_mean_coupling<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let raw = DMatrix::from_fn(self.dim_x, self.dim_y, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = spectral_norm(&raw);
        if s > 0.0 {
            raw * (self.coupling_scale / s)
        } else {
            raw
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    spec: QuadraticNcscSpec,
    samples: Vec<QuadraticSample>,
    mean_coupling: DMatrix<f64>,
    constants: ProblemConstants,
}

/// Draws `spec.n` samples and builds the problem.
pub fn make_quadratic<R: Rng + ?Sized>(spec: &QuadraticNcscSpec, rng: &mut R) -> Result<QuadraticProblem> {
    spec.validate()?;
    let mean = spec.draw_mean_coupling(rng);
    let samples = (0..spec.n).map(|_| spec.draw_sample(&mean, rng)).collect();
    QuadraticProblem::from_samples(spec, samples)
}

impl QuadraticProblem {
    /// Builds the problem from explicit samples; `spec.n` is ignored in
    /// favour of `samples.len()`.
    pub fn from_samples(spec: &QuadraticNcscSpec, samples: Vec<QuadraticSample>) -> Result<Self> {
        let mut spec = *spec;
        spec.n = samples.len();
        spec.validate()?;
        for s in &samples {
            if s.w.len() != spec.dim_x || s.coupling.shape() != (spec.dim_x, spec.dim_y) {
                return Err(Error::LengthMismatch(format!(
                    "sample shapes must be w: {}, A: {}x{}",
                    spec.dim_x, spec.dim_x, spec.dim_y
                )));
            }
        }
        let n = samples.len() as f64;
        let mut mean_coupling = DMatrix::zeros(spec.dim_x, spec.dim_y);
        for s in &samples {
            mean_coupling += &s.coupling;
        }
        mean_coupling /= n;

        let s_abs = spec.nonconvex_weight.abs();
        let (x_r, y_r) = (spec.x_radius, spec.diameter / 2.0);
        let mut c = ProblemConstants {
            g_x: 0.0,
            g_y: 0.0,
            l_x: 0.0,
            l_y: spec.mu,
            l_xy: 0.0,
            mu: spec.mu,
            loss_bound: 0.0,
            diameter: spec.diameter,
        };
        for s in &samples {
            let a = spectral_norm(&s.coupling);
            let w = s.w.norm();
            c.g_x = c.g_x.max(s_abs * w + spec.ridge * x_r + a * y_r);
            c.g_y = c.g_y.max(a * x_r + spec.mu * y_r);
            c.l_x = c.l_x.max(s_abs * w * w + spec.ridge);
            c.l_xy = c.l_xy.max(a);
            c.loss_bound = c
                .loss_bound
                .max(s_abs + 0.5 * spec.ridge * x_r * x_r + x_r * a * y_r + 0.5 * spec.mu * y_r * y_r);
        }
        Ok(Self {
            spec,
            samples,
            mean_coupling,
            constants: c,
        })
    }

    pub fn spec(&self) -> &QuadraticNcscSpec {
        &self.spec
    }

    pub fn samples(&self) -> &[QuadraticSample] {
        &self.samples
    }

    pub fn mean_coupling(&self) -> &DMatrix<f64> {
        &self.mean_coupling
    }

    /// `y*(x) = Π(Āᵀx/μ)`.
    pub fn y_star(&self, x: &Vector) -> Vector {
        let mut y = self.mean_coupling.tr_mul(x) / self.spec.mu;
        project_ball(&mut y, self.spec.diameter / 2.0);
        y
    }

    /// Same instance with sample `i` replaced by `sample`.
    pub fn with_replaced(&self, i: usize, sample: QuadraticSample) -> Result<Self> {
        let mut samples = self.samples.clone();
        samples[i] = sample;
        Self::from_samples(&self.spec, samples)
    }
}

impl MinimaxProblem for QuadraticProblem {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn n(&self) -> usize {
        self.samples.len()
    }

    fn dim_x(&self) -> usize {
        self.spec.dim_x
    }

    fn dim_y(&self) -> usize {
        self.spec.dim_y
    }

    fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    fn loss(&self, x: &Vector, y: &Vector, i: usize) -> f64 {
        let z = &self.samples[i];
        self.spec.nonconvex_weight * (z.w.dot(x) + z.phase).sin()
            + 0.5 * self.spec.ridge * x.norm_squared()
            + x.dot(&(&z.coupling * y))
            - 0.5 * self.spec.mu * y.norm_squared()
    }

    fn grad_x(&self, x: &Vector, y: &Vector, i: usize, out: &mut Vector) {
        let z = &self.samples[i];
        out.gemv(1.0, &z.coupling, y, 0.0);
        out.axpy(self.spec.ridge, x, 1.0);
        let c = self.spec.nonconvex_weight * (z.w.dot(x) + z.phase).cos();
        out.axpy(c, &z.w, 1.0);
    }

    fn grad_y(&self, x: &Vector, y: &Vector, i: usize, out: &mut Vector) {
        let z = &self.samples[i];
        out.gemv_tr(1.0, &z.coupling, x, 0.0);
        out.axpy(-self.spec.mu, y, 1.0);
    }

    fn project_y(&self, y: &mut Vector) {
        project_ball(y, self.spec.diameter / 2.0);
    }

    fn inner_maximizer(&self, x: &Vector) -> Option<Vector> {
        Some(self.y_star(x))
    }

    fn full_grad_x(&self, x: &Vector, y: &Vector) -> Vector {
        let mut g = &self.mean_coupling * y;
        g.axpy(self.spec.ridge, x, 1.0);
        let s = self.spec.nonconvex_weight;
        if s != 0.0 {
            let k = s / self.samples.len() as f64;
            for z in &self.samples {
                g.axpy(k * (z.w.dot(x) + z.phase).cos(), &z.w, 1.0);
            }
        }
        g
    }

    fn full_grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        let mut g = self.mean_coupling.tr_mul(x);
        g.axpy(-self.spec.mu, y, 1.0);
        g
    }
}
