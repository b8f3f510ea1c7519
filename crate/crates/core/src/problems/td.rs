//! Policy evaluation with linear features through the MSPBE saddle form.
//!
//! `ℓ(θ, ω; s, a, s′) = δ·Ψ(s)ᵀω − ½(Ψ(s)ᵀω)²` with the TD error
//! `δ = r(s, a) + γθᵀΨ(s′) − θᵀΨ(s)`. Maximizing over `ω` recovers
//! `½ b̂(θ)ᵀ Ĝ⁻¹ b̂(θ)` where `Ĝ = (1/n)ΣΨΨᵀ` and `b̂(θ) = (1/n)ΣδΨ`.
//! Transitions are drawn i.i.d. from the stationary distribution of the
//! policy-induced chain.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{project_ball, spectral_norm, MinimaxProblem, ProblemConstants};
use crate::{Error, Result, Vector};

const STATIONARY_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITERS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularMdpSpec {
    /// `transitions[s][a][s′] = P(s′ | s, a)`.
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// `rewards[s][a]`.
    pub rewards: Vec<Vec<f64>>,
    /// `policy[s][a] = π(a | s)`.
    pub policy: Vec<Vec<f64>>,
    pub gamma: f64,
    /// `features[s] = Ψ(s)`.
    pub features: Vec<Vec<f64>>,
    /// Number of sampled transitions.
    pub n: usize,
    pub omega_radius: f64,
    /// Radius of the θ-region the declared constants are valid on.
    pub theta_radius: f64,
}

/// Random dense MDP: exponential weights normalized per row, so every
/// transition has positive probability and the chain is irreducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomMdpSpec {
    pub states: usize,
    pub actions: usize,
    /// Feature dimension; equal to `states` with `one_hot` set.
    pub feature_dim: usize,
    pub one_hot: bool,
    pub gamma: f64,
    pub n: usize,
    pub omega_radius: f64,
    pub theta_radius: f64,
}

impl Default for RandomMdpSpec {
    fn default() -> Self {
        Self {
            states: 10,
            actions: 2,
            feature_dim: 4,
            one_hot: false,
            gamma: 0.9,
            n: 2000,
            omega_radius: 10.0,
            theta_radius: 10.0,
        }
    }
}

fn random_simplex_row<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

impl RandomMdpSpec {
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> TabularMdpSpec {
        let (s, a) = (self.states, self.actions);
        let transitions = (0..s)
            .map(|_| (0..a).map(|_| random_simplex_row(s, rng)).collect())
            .collect();
        let rewards = (0..s)
            .map(|_| (0..a).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let policy = (0..s).map(|_| random_simplex_row(a, rng)).collect();
        let features = if self.one_hot {
            (0..s)
                .map(|i| (0..s).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect()
        } else {
            let scale = 1.0 / (self.feature_dim as f64).sqrt();
            (0..s)
                .map(|_| {
                    (0..self.feature_dim)
                        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect()
        };
        TabularMdpSpec {
            transitions,
            rewards,
            policy,
            gamma: self.gamma,
            features,
            n: self.n,
            omega_radius: self.omega_radius,
            theta_radius: self.theta_radius,
        }
    }
}

fn check_distribution(row: &[f64], what: &'static str) -> Result<()> {
    if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::param(what, "entries must be finite and nonnegative"));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::param(what, format!("row sums to {s}, expected 1")));
    }
    Ok(())
}

impl TabularMdpSpec {
    pub fn states(&self) -> usize {
        self.transitions.len()
    }

    pub fn actions(&self) -> usize {
        self.policy.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        let (s, a) = (self.states(), self.actions());
        if s == 0 || a == 0 {
            return Err(Error::param("mdp", "need at least one state and one action"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::param("gamma", format!("must lie in [0, 1), got {}", self.gamma)));
        }
        if self.n == 0 {
            return Err(Error::param("n", "must be >= 1"));
        }
        if !(self.omega_radius > 0.0) || !(self.theta_radius > 0.0) {
            return Err(Error::param("omega_radius/theta_radius", "must be > 0"));
        }
        if self.rewards.len() != s || self.policy.len() != s || self.features.len() != s {
            return Err(Error::LengthMismatch(format!(
                "rewards, policy and features need {s} rows"
            )));
        }
        let d = self.features[0].len();
        if d == 0 || self.features.iter().any(|f| f.len() != d) {
            return Err(Error::LengthMismatch("feature vectors differ in length".into()));
        }
        for st in 0..s {
            if self.transitions[st].len() != a || self.rewards[st].len() != a || self.policy[st].len() != a {
                return Err(Error::LengthMismatch(format!("state {st} needs {a} actions")));
            }
            check_distribution(&self.policy[st], "policy")?;
            for row in &self.transitions[st] {
                if row.len() != s {
                    return Err(Error::LengthMismatch(format!("transition rows need {s} entries")));
                }
                check_distribution(row, "transitions")?;
            }
        }
        Ok(())
    }

    /// `P^π[s, s′] = Σ_a π(a|s) P(s′|s, a)`.
    pub fn policy_transition_matrix(&self) -> DMatrix<f64> {
        let s = self.states();
        DMatrix::from_fn(s, s, |i, j| {
            self.policy[i]
                .iter()
                .zip(&self.transitions[i])
                .map(|(pa, row)| pa * row[j])
                .sum()
        })
    }

    /// `R^π[s] = Σ_a π(a|s) r(s, a)`.
    pub fn policy_reward(&self) -> Vector {
        Vector::from_iterator(
            self.states(),
            (0..self.states()).map(|i| self.policy[i].iter().zip(&self.rewards[i]).map(|(p, r)| p * r).sum()),
        )
    }

    /// Exact `V^π` from `(I − γP^π)V = R^π`.
    pub fn exact_value(&self) -> Result<Vector> {
        let s = self.states();
        let m = DMatrix::identity(s, s) - self.policy_transition_matrix() * self.gamma;
        m.lu()
            .solve(&self.policy_reward())
            .ok_or(Error::NonFinite("singular Bellman system"))
    }
}

fn strongly_connected(p: &DMatrix<f64>) -> bool {
    let s = p.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; s];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..s {
                let w = if forward { p[(u, v)] } else { p[(v, u)] };
                if w > 0.0 && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|b| b)
    };
    reach(true) && reach(false)
}

/// Stationary distribution by power iteration on the lazy chain `(I + P)/2`,
/// which shares `P`'s stationary law and is aperiodic.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<Vector> {
    let s = p.nrows();
    if s == 0 || p.ncols() != s {
        return Err(Error::param("transition matrix", "must be square and nonempty"));
    }
    if !strongly_connected(p) {
        return Err(Error::Reducible);
    }
    let lazy_t = (DMatrix::identity(s, s) + p).transpose() * 0.5;
    let mut d = Vector::from_element(s, 1.0 / s as f64);
    for _ in 0..STATIONARY_MAX_ITERS {
        let next = &lazy_t * &d;
        let change = (&next - &d).lp_norm(1);
        d = next;
        if change < STATIONARY_TOL {
            let total = d.sum();
            return Ok(d / total);
        }
    }
    Err(Error::Reducible)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
}

#[derive(Debug, Clone)]
pub struct TdProblem {
    spec: TabularMdpSpec,
    features: Vec<Vector>,
    transitions: Vec<Transition>,
    stationary: Vector,
    covariance: DMatrix<f64>,
    covariance_eigen: SymmetricEigen<f64, nalgebra::Dyn>,
    constants: ProblemConstants,
}

pub fn make_td<R: Rng + ?Sized>(spec: &TabularMdpSpec, rng: &mut R) -> Result<TdProblem> {
    spec.validate()?;
    let stationary = stationary_distribution(&spec.policy_transition_matrix())?;
    let states =
        WeightedIndex::new(stationary.iter().copied()).map_err(|e| Error::param("stationary", e.to_string()))?;
    let actions: Vec<WeightedIndex<f64>> = spec
        .policy
        .iter()
        .map(|row| WeightedIndex::new(row.iter().copied()))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::param("policy", e.to_string()))?;
    let mut next: Vec<Vec<WeightedIndex<f64>>> = Vec::with_capacity(spec.states());
    for rows in &spec.transitions {
        next.push(
            rows.iter()
                .map(|row| WeightedIndex::new(row.iter().copied()))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::param("transitions", e.to_string()))?,
        );
    }
    let transitions = (0..spec.n)
        .map(|_| {
            let state = states.sample(rng);
            let action = actions[state].sample(rng);
            let next_state = next[state][action].sample(rng);
            Transition {
                state,
                action,
                next_state,
            }
        })
        .collect();
    TdProblem::from_transitions(spec.clone(), transitions, stationary)
}

impl TdProblem {
    fn from_transitions(spec: TabularMdpSpec, transitions: Vec<Transition>, stationary: Vector) -> Result<Self> {
        let features: Vec<Vector> = spec.features.iter().map(|f| Vector::from_column_slice(f)).collect();
        let d = features[0].len();
        let n = transitions.len() as f64;
        let mut covariance = DMatrix::zeros(d, d);
        let mut cross = DMatrix::zeros(d, d);
        for t in &transitions {
            let psi = &features[t.state];
            covariance.ger(1.0 / n, psi, psi, 1.0);
            let diff = &features[t.next_state] * spec.gamma - psi;
            cross.ger(1.0 / n, psi, &diff, 1.0);
        }
        let eigen = SymmetricEigen::new(covariance.clone());
        let mu = eigen.eigenvalues.min();
        if !(mu > 0.0) {
            return Err(Error::param(
                "features",
                format!("empirical feature covariance is singular (smallest eigenvalue {mu:e})"),
            ));
        }
        let f = features.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let r_max = spec.rewards.iter().flatten().fold(0.0f64, |m, r| m.max(r.abs()));
        let (w, om, g) = (spec.theta_radius, spec.omega_radius, spec.gamma);
        let delta_max = r_max + (1.0 + g) * w * f;
        let constants = ProblemConstants {
            g_x: (1.0 + g) * f * f * om,
            g_y: delta_max * f + f * f * om,
            l_x: 0.0,
            l_y: eigen.eigenvalues.max(),
            l_xy: spectral_norm(&cross),
            mu,
            loss_bound: delta_max * f * om + 0.5 * f * f * om * om,
            diameter: 2.0 * om,
        };
        Ok(Self {
            spec,
            features,
            transitions,
            stationary,
            covariance,
            covariance_eigen: eigen,
            constants,
        })
    }

    pub fn spec(&self) -> &TabularMdpSpec {
        &self.spec
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn stationary(&self) -> &Vector {
        &self.stationary
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    fn td_error(&self, theta: &Vector, t: &Transition) -> f64 {
        self.spec.rewards[t.state][t.action] + self.spec.gamma * theta.dot(&self.features[t.next_state])
            - theta.dot(&self.features[t.state])
    }

    /// `b̂(θ) = (1/n)Σ δᵢΨ(sᵢ)`.
    pub fn empirical_b(&self, theta: &Vector) -> Vector {
        let mut b = Vector::zeros(self.features[0].len());
        for t in &self.transitions {
            b.axpy(self.td_error(theta, t), &self.features[t.state], 1.0);
        }
        b / self.transitions.len() as f64
    }

    /// `argmax_{‖ω‖≤Ω} ωᵀb − ½ωᵀĜω`. Interior case is `Ĝ⁻¹b`; otherwise the
    /// KKT multiplier `ν` with `‖(Ĝ + νI)⁻¹b‖ = Ω` is found by bisection.
    pub fn omega_star(&self, theta: &Vector) -> Vector {
        let b = self.empirical_b(theta);
        let e = &self.covariance_eigen;
        let coords = e.eigenvectors.tr_mul(&b);
        let solve = |nu: f64| {
            let scaled = Vector::from_iterator(
                coords.len(),
                coords.iter().zip(e.eigenvalues.iter()).map(|(c, l)| c / (l + nu)),
            );
            &e.eigenvectors * scaled
        };
        let radius = self.spec.omega_radius;
        let interior = solve(0.0);
        if interior.norm() <= radius {
            return interior;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while solve(hi).norm() > radius {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if solve(mid).norm() > radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut w = solve(hi);
        project_ball(&mut w, radius);
        w
    }

    /// `½ b̂ᵀĜ⁻¹b̂` over the sampled transitions.
    pub fn mspbe_empirical(&self, theta: &Vector) -> f64 {
        let b = self.empirical_b(theta);
        let e = &self.covariance_eigen;
        let coords = e.eigenvectors.tr_mul(&b);
        0.5 * coords
            .iter()
            .zip(e.eigenvalues.iter())
            .map(|(c, l)| c * c / l)
            .sum::<f64>()
    }

    /// `½ bᵀG⁻¹b` under the exact stationary distribution and model.
    pub fn mspbe_population(&self, theta: &Vector) -> Result<f64> {
        let d = self.features[0].len();
        let v: Vector = Vector::from_iterator(self.features.len(), self.features.iter().map(|f| f.dot(theta)));
        let p = self.spec.policy_transition_matrix();
        let r = self.spec.policy_reward();
        let expected_delta = r + (&p * &v) * self.spec.gamma - &v;
        let mut g = DMatrix::zeros(d, d);
        let mut b = Vector::zeros(d);
        for (s, psi) in self.features.iter().enumerate() {
            g.ger(self.stationary[s], psi, psi, 1.0);
            b.axpy(self.stationary[s] * expected_delta[s], psi, 1.0);
        }
        let sol = g
            .cholesky()
            .ok_or_else(|| Error::param("features", "population feature covariance is singular"))?
            .solve(&b);
        Ok(0.5 * b.dot(&sol))
    }
}

impl MinimaxProblem for TdProblem {
    fn name(&self) -> &'static str {
        "td"
    }

    fn n(&self) -> usize {
        self.transitions.len()
    }

    fn dim_x(&self) -> usize {
        self.features[0].len()
    }

    fn dim_y(&self) -> usize {
        self.features[0].len()
    }

    fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    fn loss(&self, x: &Vector, y: &Vector, i: usize) -> f64 {
        let t = &self.transitions[i];
        let u = self.features[t.state].dot(y);
        self.td_error(x, t) * u - 0.5 * u * u
    }

    fn grad_x(&self, _x: &Vector, y: &Vector, i: usize, out: &mut Vector) {
        let t = &self.transitions[i];
        let u = self.features[t.state].dot(y);
        out.copy_from(&self.features[t.next_state]);
        *out *= self.spec.gamma * u;
        out.axpy(-u, &self.features[t.state], 1.0);
    }

    fn grad_y(&self, x: &Vector, y: &Vector, i: usize, out: &mut Vector) {
        let t = &self.transitions[i];
        let psi = &self.features[t.state];
        out.copy_from(psi);
        *out *= self.td_error(x, t) - psi.dot(y);
    }

    fn project_y(&self, y: &mut Vector) {
        project_ball(y, self.spec.omega_radius);
    }

    fn inner_maximizer(&self, x: &Vector) -> Option<Vector> {
        Some(self.omega_star(x))
    }

    fn full_grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        self.empirical_b(x) - &self.covariance * y
    }
}
