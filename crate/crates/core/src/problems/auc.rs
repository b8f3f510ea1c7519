//! Least-squares AUC maximization as a minimax problem.
//!
//! With a linear scorer `h = wᵀx` and positive-class ratio `p`:
//!
//! ```text
//! F(w,a,b,α; z) = (1−p)(h−a)²·[y=1] + p(h−b)²·[y=−1]
//!               + 2α(p(1−p) + p·h·[y=−1] − (1−p)·h·[y=1]) − p(1−p)α²
//! ```
//!
//! The primal variable is `(w, a, b)`; the dual `α` lives in `[0, Λ_α]`.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{MinimaxProblem, ProblemConstants};
use crate::{Error, Result, Vector};

pub const DEFAULT_ALPHA_BOUND: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AucSample {
    pub features: Vector,
    /// `+1` or `−1`.
    pub label: i8,
}

impl AucSample {
    pub fn new(features: Vector, label: i8) -> Result<Self> {
        if label != 1 && label != -1 {
            return Err(Error::Dataset(format!("label must be +1 or -1, got {label}")));
        }
        Ok(Self { features, label })
    }

    fn positive(&self) -> bool {
        self.label == 1
    }
}

/// Two Gaussian blobs with identity covariance whose means sit `separation`
/// apart along the first axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AucSyntheticSpec {
    pub n: usize,
    pub dim: usize,
    /// Fraction of positive samples.
    pub positive_ratio: f64,
    pub separation: f64,
    /// Scale applied to every feature after sampling.
    pub feature_scale: f64,
}

impl Default for AucSyntheticSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            dim: 10,
            positive_ratio: 0.1,
            separation: 4.0,
            feature_scale: 0.25,
        }
    }
}

impl AucSyntheticSpec {
    /// Exactly `round(n·positive_ratio)` positives (at least one of each class).
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<AucSample>> {
        if self.n < 2 || self.dim == 0 {
            return Err(Error::param("n/dim", "need n >= 2 and dim >= 1"));
        }
        if !(self.positive_ratio > 0.0 && self.positive_ratio < 1.0) {
            return Err(Error::param("positive_ratio", "must lie in (0, 1)"));
        }
        let n_pos = ((self.n as f64 * self.positive_ratio).round() as usize).clamp(1, self.n - 1);
        let mut out = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let label = if i < n_pos { 1 } else { -1 };
            let mut f = Vector::from_iterator(self.dim, (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
            f[0] += 0.5 * self.separation * label as f64;
            f *= self.feature_scale;
            out.push(AucSample { features: f, label });
        }
        Ok(out)
    }
}

/// Reads a CSV with a header row. Every column except `label_column` is a
/// numeric feature; the label column holds `1`/`-1` (or `0` for negative).
pub fn load_auc_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Vec<AucSample>> {
    let mut reader = csv::Reader::from_path(path.as_ref()).map_err(|e| Error::Dataset(e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::Dataset(e.to_string()))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::Dataset(format!("no column named {label_column:?}")))?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Dataset(e.to_string()))?;
        let mut features = Vec::with_capacity(record.len().saturating_sub(1));
        let mut label = 0i8;
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Dataset(format!("row {}: cannot parse {field:?}", line + 2)))?;
            if k == label_idx {
                label = match v {
                    1.0 => 1,
                    -1.0 | 0.0 => -1,
                    _ => {
                        return Err(Error::Dataset(format!(
                            "row {}: label {v} not in {{-1, 0, 1}}",
                            line + 2
                        )))
                    }
                };
            } else {
                features.push(v);
            }
        }
        out.push(AucSample {
            features: Vector::from_vec(features),
            label,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Ok(out)
}

/// Mann–Whitney AUC with ties counted as one half.
pub fn auc_score(scores: &[f64], labels: &[i8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average ranks over tie blocks, 1-based
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] == 1 {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q))
}

#[derive(Debug, Clone)]
pub struct AucProblem {
    samples: Vec<AucSample>,
    dim: usize,
    p: f64,
    alpha_bound: f64,
    constants: ProblemConstants,
}

/// Builds the problem; `primal_radius` bounds `‖(w, a, b)‖` for the declared
/// constants.
pub fn make_auc(samples: Vec<AucSample>, alpha_bound: f64, primal_radius: f64) -> Result<AucProblem> {
    if samples.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if !(alpha_bound > 0.0) || !(primal_radius > 0.0) {
        return Err(Error::param("alpha_bound/primal_radius", "must be > 0"));
    }
    let dim = samples[0].features.len();
    if samples.iter().any(|s| s.features.len() != dim) {
        return Err(Error::LengthMismatch("feature vectors differ in length".into()));
    }
    if samples.iter().any(|s| s.features.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("features"));
    }
    let n_pos = samples.iter().filter(|s| s.positive()).count();
    if n_pos == 0 || n_pos == samples.len() {
        return Err(Error::SingleClass);
    }
    let p = n_pos as f64 / samples.len() as f64;
    let q = 1.0 - p;
    let pq = p * q;
    let big = p.max(q);
    let x = samples.iter().map(|s| s.features.norm()).fold(0.0, f64::max);
    let (w, lam) = (primal_radius, alpha_bound);
    let resid = w * (x + 1.0);
    let constants = ProblemConstants {
        g_x: 2.0 * big * resid * (x * x + 1.0).sqrt() + 2.0 * lam * big * x,
        g_y: 2.0 * (pq + big * w * x) + 2.0 * pq * lam,
        l_x: 2.0 * big * (x * x + 1.0),
        l_y: 2.0 * pq,
        l_xy: 2.0 * big * x,
        mu: 2.0 * pq,
        loss_bound: big * resid * resid + 2.0 * lam * (pq + big * w * x) + pq * lam * lam,
        diameter: lam,
    };
    Ok(AucProblem {
        samples,
        dim,
        p,
        alpha_bound,
        constants,
    })
}

impl AucProblem {
    pub fn positive_ratio(&self) -> f64 {
        self.p
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[AucSample] {
        &self.samples
    }

    /// `wᵀx` for the `w` block of a primal iterate.
    pub fn score(&self, x: &Vector, features: &Vector) -> f64 {
        x.rows(0, self.dim).dot(features)
    }

    /// Training AUC of the scorer encoded in `x`.
    pub fn auc(&self, x: &Vector) -> Result<f64> {
        let scores: Vec<f64> = self.samples.iter().map(|s| self.score(x, &s.features)).collect();
        let labels: Vec<i8> = self.samples.iter().map(|s| s.label).collect();
        auc_score(&scores, &labels)
    }

    fn alpha_coefficient(&self, h: f64, positive: bool) -> f64 {
        let (p, q) = (self.p, 1.0 - self.p);
        if positive {
            p * q - q * h
        } else {
            p * q + p * h
        }
    }

    /// Closed-form `α*(x)`: the averaged loss is `2α·c̄ − p(1−p)α²`.
    pub fn alpha_star(&self, x: &Vector) -> f64 {
        let c = self
            .samples
            .iter()
            .map(|s| self.alpha_coefficient(self.score(x, &s.features), s.positive()))
            .sum::<f64>()
            / self.samples.len() as f64;
        (c / (self.p * (1.0 - self.p))).clamp(0.0, self.alpha_bound)
    }
}

impl MinimaxProblem for AucProblem {
    fn name(&self) -> &'static str {
        "auc"
    }

    fn n(&self) -> usize {
        self.samples.len()
    }

    fn dim_x(&self) -> usize {
        self.dim + 2
    }

    fn dim_y(&self) -> usize {
        1
    }

    fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    fn loss(&self, x: &Vector, y: &Vector, i: usize) -> f64 {
        let s = &self.samples[i];
        let (p, q) = (self.p, 1.0 - self.p);
        let h = self.score(x, &s.features);
        let alpha = y[0];
        let sq = if s.positive() {
            q * (h - x[self.dim]).powi(2)
        } else {
            p * (h - x[self.dim + 1]).powi(2)
        };
        sq + 2.0 * alpha * self.alpha_coefficient(h, s.positive()) - p * q * alpha * alpha
    }

    fn grad_x(&self, x: &Vector, y: &Vector, i: usize, out: &mut Vector) {
        let s = &self.samples[i];
        let (p, q) = (self.p, 1.0 - self.p);
        let h = self.score(x, &s.features);
        let alpha = y[0];
        out.fill(0.0);
        let dh = if s.positive() {
            let r = h - x[self.dim];
            out[self.dim] = -2.0 * q * r;
            2.0 * q * r - 2.0 * alpha * q
        } else {
            let r = h - x[self.dim + 1];
            out[self.dim + 1] = -2.0 * p * r;
            2.0 * p * r + 2.0 * alpha * p
        };
        out.rows_mut(0, self.dim).axpy(dh, &s.features, 0.0);
    }

    fn grad_y(&self, x: &Vector, y: &Vector, i: usize, out: &mut Vector) {
        let s = &self.samples[i];
        let pq = self.p * (1.0 - self.p);
        let h = self.score(x, &s.features);
        out[0] = 2.0 * self.alpha_coefficient(h, s.positive()) - 2.0 * pq * y[0];
    }

    fn project_y(&self, y: &mut Vector) {
        y[0] = y[0].clamp(0.0, self.alpha_bound);
    }

    fn inner_maximizer(&self, x: &Vector) -> Option<Vector> {
        Some(Vector::from_element(1, self.alpha_star(x)))
    }
}
