//! DP-SGDA, clipped mini-batch SGA and PrivateDiff Minimax.

mod gda;
mod privatediff;
mod schedule;
mod sga;
mod sgda;

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::privacy::{clip_in_place, verify_budget, AccountantConfig, BudgetReport, Mechanism, PrivacyBudget};
use crate::problems::{analytic_phi_grad, MinimaxProblem};
use crate::{Error, Result, Vector};

pub use gda::gda_reference;
pub use privatediff::{
    privatediff_mechanisms, privatediff_minimax, privatediff_minimax_observed, BatchPairing, PrivateDiffConfig,
};
pub use schedule::{
    c3_constant, suggest_privatediff, suggest_schedule, suggest_sgda, Algorithm, ScheduleDraft, FAILURE_PROBABILITY,
};
pub use sga::{minibatch_sga, minibatch_sga_observed};
pub use sgda::{dp_sgda, dp_sgda_observed, sgda_mechanisms, SgdaConfig};

/// Divergence guard: `‖x‖` may not exceed this multiple of `max(‖x₀‖, 1)`.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// How the returned iterate is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Keep every iterate and draw the output after the run.
    #[default]
    Stored,
    /// Reservoir sampling of size one during the run; iterates are not kept.
    Reservoir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// `‖∇Φ(x_r)‖` when the problem has a closed-form inner maximizer.
    pub grad_phi_norm: Option<f64>,
    /// `L̂(x_r, y_r)` at the round's output pair.
    pub loss: Option<f64>,
    /// Norm of the noise vector added to the x-update.
    pub noise_x_norm: f64,
    /// Per-coordinate standard deviation of that noise.
    pub noise_x_std: f64,
    /// Difference-round clipping radius `C₂‖x_r − x_{r−1}‖ + C₃`.
    pub c2r: Option<f64>,
    /// Norm of the private gradient estimator used for the x-step.
    pub estimator_norm: f64,
    /// Whether any clipping threshold was active while producing this row.
    pub clipped: bool,
    pub wallclock_ms: f64,
}

impl RoundRecord {
    fn initial() -> Self {
        Self {
            round: 0,
            grad_phi_norm: None,
            loss: None,
            noise_x_norm: 0.0,
            noise_x_std: 0.0,
            c2r: None,
            estimator_norm: 0.0,
            clipped: false,
            wallclock_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub records: Vec<RoundRecord>,
    /// `(x_r, y_r)` for every row, empty under reservoir selection.
    #[serde(skip)]
    pub iterates: Vec<(Vector, Vector)>,
    /// Smallest round the output may be drawn from.
    pub first_selectable: usize,
}

impl OptimizerTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerOutput {
    pub x_priv: Vector,
    pub y_priv: Vector,
    pub selected_round: usize,
    pub trace: OptimizerTrace,
    /// Every Gaussian mechanism the run invoked, for the accountant.
    pub mechanisms: Vec<Mechanism>,
}

impl OptimizerOutput {
    /// Accountant check of this run's mechanisms against `budget`.
    pub fn achieved_budget(&self, budget: &PrivacyBudget, config: &AccountantConfig) -> Result<BudgetReport> {
        verify_budget(&self.mechanisms, budget, config)
    }
}

/// Uniform draw over rows `first_selectable..` of a stored trace.
pub fn select_uniform_iterate<R: Rng + ?Sized>(trace: &OptimizerTrace, rng: &mut R) -> Result<(usize, Vector, Vector)> {
    if trace.iterates.is_empty() || trace.first_selectable >= trace.iterates.len() {
        return Err(Error::Empty("trace"));
    }
    let k = rng.random_range(trace.first_selectable..trace.iterates.len());
    let (x, y) = &trace.iterates[k];
    Ok((trace.records[k].round, x.clone(), y.clone()))
}

/// Shared per-run bookkeeping: metrics, the divergence guard, wallclock and
/// output selection.
pub(crate) struct Recorder<'a, P: ?Sized, R> {
    problem: &'a P,
    selection: Selection,
    metrics: bool,
    start: Option<Instant>,
    bound: f64,
    trace: OptimizerTrace,
    reservoir: Option<(usize, Vector, Vector)>,
    seen: usize,
    select_rng: R,
}

impl<'a, P: MinimaxProblem + ?Sized, R: Rng> Recorder<'a, P, R> {
    pub fn new(
        problem: &'a P,
        x0: &Vector,
        selection: Selection,
        metrics: bool,
        wallclock: bool,
        first_selectable: usize,
        select_rng: R,
    ) -> Self {
        Self {
            problem,
            selection,
            metrics,
            start: wallclock.then(Instant::now),
            bound: DIVERGENCE_FACTOR * x0.norm().max(1.0),
            trace: OptimizerTrace {
                first_selectable,
                ..Default::default()
            },
            reservoir: None,
            seen: 0,
            select_rng,
        }
    }

    pub fn check(&self, round: usize, x: &Vector, y: &Vector) -> Result<()> {
        let norm = x.norm();
        if !norm.is_finite() || norm > self.bound || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { round, norm });
        }
        Ok(())
    }

    /// Appends a row, filling in metrics, and returns it for observers.
    pub fn push(&mut self, mut record: RoundRecord, x: &Vector, y: &Vector) -> Result<&RoundRecord> {
        self.check(record.round, x, y)?;
        if self.metrics {
            record.loss = Some(self.problem.full_loss(x, y));
            record.grad_phi_norm = match analytic_phi_grad(self.problem, x) {
                Ok((_, g)) => Some(g.norm()),
                Err(Error::NoClosedForm(_)) => None,
                Err(e) => return Err(e),
            };
        }
        if let Some(t) = self.start {
            record.wallclock_ms = t.elapsed().as_secs_f64() * 1e3;
        }
        if record.round >= self.trace.first_selectable {
            match self.selection {
                Selection::Stored => {}
                Selection::Reservoir => {
                    self.seen += 1;
                    if self.select_rng.random_range(0..self.seen) == 0 {
                        self.reservoir = Some((record.round, x.clone(), y.clone()));
                    }
                }
            }
        }
        if self.selection == Selection::Stored {
            self.trace.iterates.push((x.clone(), y.clone()));
        }
        self.trace.records.push(record);
        Ok(self.trace.records.last().expect("just pushed"))
    }

    pub fn finish(mut self, mechanisms: Vec<Mechanism>) -> Result<OptimizerOutput> {
        let (selected_round, x_priv, y_priv) = match self.selection {
            Selection::Stored => select_uniform_iterate(&self.trace, &mut self.select_rng)?,
            Selection::Reservoir => self.reservoir.take().ok_or(Error::Empty("trace"))?,
        };
        Ok(OptimizerOutput {
            x_priv,
            y_priv,
            selected_round,
            trace: self.trace,
            mechanisms,
        })
    }
}

/// Clips in place, treating a zero threshold as "clip to the origin".
pub(crate) fn clip_or_zero(v: &mut Vector, c: f64) -> Result<bool> {
    if c == 0.0 {
        let active = v.iter().any(|&t| t != 0.0);
        v.fill(0.0);
        return Ok(active);
    }
    clip_in_place(v, c)
}

pub(crate) fn initial_point(given: &Option<Vec<f64>>, dim: usize, name: &'static str) -> Result<Vector> {
    match given {
        None => Ok(Vector::zeros(dim)),
        Some(v) if v.len() == dim => Ok(Vector::from_column_slice(v)),
        Some(v) => Err(Error::LengthMismatch(format!(
            "{name} has length {}, expected {dim}",
            v.len()
        ))),
    }
}

pub(crate) fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be > 0, got {v}")))
    }
}

pub(crate) fn check_sigma(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {v}")))
    }
}

pub(crate) fn check_batch(m: usize, n: usize) -> Result<()> {
    if m == 0 || m > n {
        Err(Error::param("batch_size", format!("must lie in 1..={n}, got {m}")))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn trace_of(k: usize) -> OptimizerTrace {
        OptimizerTrace {
            records: (0..k)
                .map(|r| RoundRecord {
                    round: r,
                    ..RoundRecord::initial()
                })
                .collect(),
            iterates: (0..k)
                .map(|r| (Vector::from_element(1, r as f64), Vector::zeros(1)))
                .collect(),
            first_selectable: 0,
        }
    }

    #[test]
    fn single_round_trace_selects_it() {
        let t = trace_of(1);
        let (r, x, _) = select_uniform_iterate(&t, &mut rng::seeded(0)).unwrap();
        assert_eq!(r, 0);
        assert_eq!(x[0], 0.0);
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert!(select_uniform_iterate(&OptimizerTrace::default(), &mut rng::seeded(0)).is_err());
        let mut t = trace_of(3);
        t.first_selectable = 3;
        assert!(select_uniform_iterate(&t, &mut rng::seeded(0)).is_err());
    }

    #[test]
    fn selection_is_uniform() {
        let t = trace_of(10);
        let mut r = rng::seeded(1);
        let mut counts = [0usize; 10];
        for _ in 0..100_000 {
            counts[select_uniform_iterate(&t, &mut r).unwrap().0] += 1;
        }
        for c in counts {
            assert!((c as i64 - 10_000).abs() <= 400, "{counts:?}");
        }
    }

    #[test]
    fn selection_respects_first_selectable_and_seed() {
        let mut t = trace_of(4);
        t.first_selectable = 1;
        let draws = |seed| {
            let mut r = rng::seeded(seed);
            (0..50)
                .map(|_| select_uniform_iterate(&t, &mut r).unwrap().0)
                .collect::<Vec<_>>()
        };
        assert!(draws(2).iter().all(|&k| k >= 1));
        assert_eq!(draws(3), draws(3));
    }

    #[test]
    fn zero_threshold_clips_to_origin() {
        let mut v = Vector::from_vec(vec![1.0, -2.0]);
        assert!(clip_or_zero(&mut v, 0.0).unwrap());
        assert_eq!(v, Vector::zeros(2));
        let mut w = Vector::from_vec(vec![3.0, 4.0]);
        assert!(!clip_or_zero(&mut w, f64::INFINITY).unwrap());
    }
}
