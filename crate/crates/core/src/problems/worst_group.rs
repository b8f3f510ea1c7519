//! Worst-group risk `min_x max_{y∈Δ} Σ_g y_g L̂_g(x) − ½‖y‖²`.
//!
//! Each group loss is the mean logistic loss of a linear model over that
//! group's samples, plus an optional ridge `ρ/2‖x‖²`. Sample `i` in group `g`
//! carries the weight `n/n_g` so that the average over all `n` samples
//! reproduces the objective.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{project_simplex, MinimaxProblem, ProblemConstants};
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct WorstGroupSample {
    pub features: Vector,
    /// `+1` or `−1`.
    pub label: f64,
    pub group: usize,
}

/// Synthetic generator: group `g` draws features around its own mean shift
/// and labels from its own ground-truth linear model, so the groups disagree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorstGroupSpec {
    pub n: usize,
    pub dim: usize,
    pub groups: usize,
    pub ridge: f64,
    /// Radius of the x-region the declared constants are valid on.
    pub x_radius: f64,
    /// Probability of flipping a label.
    pub label_noise: f64,
    pub feature_scale: f64,
}

impl Default for WorstGroupSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            dim: 10,
            groups: 3,
            ridge: 0.01,
            x_radius: 10.0,
            label_noise: 0.1,
            feature_scale: 0.3,
        }
    }
}

fn logistic_loss(margin: f64) -> f64 {
    // log(1 + e^{−m}) without overflow
    if margin > 0.0 {
        (-margin).exp().ln_1p()
    } else {
        -margin + margin.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub struct WorstGroupProblem {
    samples: Vec<WorstGroupSample>,
    groups: usize,
    group_sizes: Vec<usize>,
    dim: usize,
    ridge: f64,
    constants: ProblemConstants,
}

/// Draws samples round-robin over the groups and builds the problem.
pub fn make_worst_group<R: Rng + ?Sized>(spec: &WorstGroupSpec, rng: &mut R) -> Result<WorstGroupProblem> {
    if spec.groups < 2 {
        return Err(Error::param("groups", "need at least 2 groups"));
    }
    if spec.dim == 0 {
        return Err(Error::param("dim", "must be >= 1"));
    }
    let normal = |rng: &mut R, d: usize| Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let truths: Vec<Vector> = (0..spec.groups).map(|_| normal(rng, spec.dim).normalize()).collect();
    let shifts: Vec<Vector> = (0..spec.groups).map(|_| normal(rng, spec.dim) * 0.5).collect();
    let mut samples = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let g = i % spec.groups;
        let f = (normal(rng, spec.dim) + &shifts[g]) * spec.feature_scale;
        let mut label = if truths[g].dot(&f) >= 0.0 { 1.0 } else { -1.0 };
        if rng.random_bool(spec.label_noise.clamp(0.0, 1.0)) {
            label = -label;
        }
        samples.push(WorstGroupSample {
            features: f,
            label,
            group: g,
        });
    }
    WorstGroupProblem::from_samples(samples, spec.groups, spec.ridge, spec.x_radius)
}

impl WorstGroupProblem {
    pub fn from_samples(samples: Vec<WorstGroupSample>, groups: usize, ridge: f64, x_radius: f64) -> Result<Self> {
        if groups < 2 {
            return Err(Error::param("groups", "need at least 2 groups"));
        }
        if !(ridge >= 0.0) || !(x_radius > 0.0) {
            return Err(Error::param("ridge/x_radius", "ridge must be >= 0 and x_radius > 0"));
        }
        let dim = samples.first().ok_or(Error::Empty("dataset"))?.features.len();
        let mut group_sizes = vec![0usize; groups];
        for s in &samples {
            if s.features.len() != dim {
                return Err(Error::LengthMismatch("feature vectors differ in length".into()));
            }
            if s.group >= groups {
                return Err(Error::param("group", format!("index {} out of range", s.group)));
            }
            group_sizes[s.group] += 1;
        }
        if let Some(g) = group_sizes.iter().position(|&c| c == 0) {
            return Err(Error::EmptyGroup(g));
        }
        let n = samples.len() as f64;
        let max_weight = group_sizes.iter().map(|&c| n / c as f64).fold(0.0, f64::max);
        let x = samples.iter().map(|s| s.features.norm()).fold(0.0, f64::max);
        let w = x_radius;
        let loss_max = std::f64::consts::LN_2 + w * x;
        let constants = ProblemConstants {
            g_x: max_weight * x + ridge * w,
            g_y: max_weight * loss_max + 1.0,
            l_x: 0.25 * x * x + ridge,
            l_y: 1.0,
            l_xy: (groups as f64).sqrt() * x,
            mu: 1.0,
            loss_bound: max_weight * loss_max + 0.5 * ridge * w * w + 0.5,
            diameter: std::f64::consts::SQRT_2,
        };
        Ok(Self {
            samples,
            groups,
            group_sizes,
            dim,
            ridge,
            constants,
        })
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn samples(&self) -> &[WorstGroupSample] {
        &self.samples
    }

    fn weight(&self, i: usize) -> f64 {
        self.samples.len() as f64 / self.group_sizes[self.samples[i].group] as f64
    }

    fn sample_loss(&self, x: &Vector, i: usize) -> f64 {
        let s = &self.samples[i];
        logistic_loss(s.label * x.dot(&s.features))
    }

    /// Mean logistic loss of every group, without the ridge.
    pub fn group_losses(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(self.groups);
        for (i, s) in self.samples.iter().enumerate() {
            out[s.group] += self.sample_loss(x, i);
        }
        for g in 0..self.groups {
            out[g] /= self.group_sizes[g] as f64;
        }
        out
    }

    /// Worst group's mean loss.
    pub fn worst_group_loss(&self, x: &Vector) -> f64 {
        self.group_losses(x).max()
    }
}

impl MinimaxProblem for WorstGroupProblem {
    fn name(&self) -> &'static str {
        "worst_group"
    }

    fn n(&self) -> usize {
        self.samples.len()
    }

    fn dim_x(&self) -> usize {
        self.dim
    }

    fn dim_y(&self) -> usize {
        self.groups
    }

    fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    fn loss(&self, x: &Vector, y: &Vector, i: usize) -> f64 {
        let g = self.samples[i].group;
        self.weight(i) * y[g] * self.sample_loss(x, i) + 0.5 * self.ridge * x.norm_squared() - 0.5 * y.norm_squared()
    }

    fn grad_x(&self, x: &Vector, y: &Vector, i: usize, out: &mut Vector) {
        let s = &self.samples[i];
        let m = s.label * x.dot(&s.features);
        let c = -self.weight(i) * y[s.group] * s.label * sigmoid(-m);
        out.copy_from(&s.features);
        *out *= c;
        out.axpy(self.ridge, x, 1.0);
    }

    fn grad_y(&self, x: &Vector, y: &Vector, i: usize, out: &mut Vector) {
        out.copy_from(y);
        *out *= -1.0;
        let g = self.samples[i].group;
        out[g] += self.weight(i) * self.sample_loss(x, i);
    }

    fn project_y(&self, y: &mut Vector) {
        *y = project_simplex(y);
    }

    fn inner_maximizer(&self, x: &Vector) -> Option<Vector> {
        Some(project_simplex(&self.group_losses(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::{analytic_phi_grad, projected};
    use super::*;
    use crate::rng;

    fn instance(seed: u64) -> WorstGroupProblem {
        let spec = WorstGroupSpec {
            n: 60,
            dim: 4,
            groups: 3,
            ..Default::default()
        };
        make_worst_group(&spec, &mut rng::seeded(seed)).unwrap()
    }

    #[test]
    fn empty_group_rejected() {
        let s = |g| WorstGroupSample {
            features: Vector::zeros(2),
            label: 1.0,
            group: g,
        };
        let err = WorstGroupProblem::from_samples(vec![s(0), s(2)], 3, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::EmptyGroup(1)));
    }

    #[test]
    fn two_group_example() {
        // two groups whose losses are forced by a zero-feature sample: log 2 each
        let s = |g| WorstGroupSample {
            features: Vector::zeros(2),
            label: 1.0,
            group: g,
        };
        let p = WorstGroupProblem::from_samples(vec![s(0), s(1)], 2, 0.0, 1.0).unwrap();
        let y = p.inner_maximizer(&Vector::zeros(2)).unwrap();
        assert!((y - Vector::from_vec(vec![0.5, 0.5])).norm() < 1e-15);
        let y = project_simplex(&Vector::from_vec(vec![0.2, 0.9]));
        assert!((y - Vector::from_vec(vec![0.15, 0.85])).norm() < 1e-15);
    }

    #[test]
    fn averaged_objective_is_the_weighted_group_sum() {
        let p = instance(1);
        let mut r = rng::seeded(2);
        let x = random_vector(4, 1.0, &mut r);
        let y = projected(&p, &random_vector(3, 1.0, &mut r));
        let l = p.group_losses(&x);
        let direct = l.dot(&y) + 0.5 * 0.01 * x.norm_squared() - 0.5 * y.norm_squared();
        assert!((p.full_loss(&x, &y) - direct).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_fd() {
        let p = instance(3);
        let mut r = rng::seeded(4);
        for _ in 0..20 {
            let x = random_vector(4, 1.0, &mut r);
            let y = projected(&p, &random_vector(3, 1.0, &mut r));
            assert!(fd_gradient_error(&p, &x, &y, 1e-5) <= 1e-5);
        }
    }

    /// Points where the active set of `Π_Δ(L(x))` is unchanged under ±h
    /// perturbations along every axis.
    fn stable_active_set(p: &WorstGroupProblem, x: &Vector, h: f64) -> bool {
        let support = |v: &Vector| project_simplex(&p.group_losses(v)).map(|t| t > 0.0);
        let base = support(x);
        (0..x.len()).all(|k| {
            let mut a = x.clone();
            let mut b = x.clone();
            a[k] += h;
            b[k] -= h;
            support(&a) == base && support(&b) == base
        })
    }

    #[test]
    fn grad_phi_matches_fd_away_from_kinks() {
        let p = instance(5);
        let mut r = rng::seeded(6);
        let h = 1e-5;
        let mut checked = 0;
        while checked < 20 {
            let x = random_vector(4, 1.5, &mut r);
            if !stable_active_set(&p, &x, h) {
                continue;
            }
            let (_, g) = analytic_phi_grad(&p, &x).unwrap();
            let mut fd = Vector::zeros(4);
            for k in 0..4 {
                let mut a = x.clone();
                let mut b = x.clone();
                a[k] += h;
                b[k] -= h;
                fd[k] = (analytic_phi_grad(&p, &a).unwrap().0 - analytic_phi_grad(&p, &b).unwrap().0) / (2.0 * h);
            }
            assert!((&g - &fd).norm() / g.norm().max(1e-8) <= 1e-5);
            checked += 1;
        }
    }

    #[test]
    fn concavity_and_projection() {
        let p = instance(7);
        let mut r = rng::seeded(8);
        for _ in 0..1000 {
            let x = random_vector(4, 2.0, &mut r);
            let y1 = random_vector(3, 2.0, &mut r);
            let y2 = random_vector(3, 2.0, &mut r);
            assert!(concavity_gap(&p, &x, &y1, &y2) <= 1e-10);
            let a = projected(&p, &y1);
            assert!((projected(&p, &a) - &a).norm() < 1e-14);
            assert!((a - projected(&p, &y2)).norm() <= (&y1 - &y2).norm() + 1e-12);
        }
    }

    #[test]
    fn logistic_is_stable_for_large_margins() {
        assert!((logistic_loss(800.0)).abs() < 1e-300);
        assert!((logistic_loss(-800.0) - 800.0).abs() < 1e-9);
        assert!((logistic_loss(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
