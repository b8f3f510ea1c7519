//! Differentially private optimization for nonconvex-strongly-concave
//! minimax problems.
//!
//! The crate is organised around four layers:
//!
//! * [`privacy`]: clipping, the Gaussian mechanism, a moments accountant and
//!   closed-form noise calibration.
//! * [`problems`]: the [`MinimaxProblem`] abstraction and the shipped problem
//!   families (a synthetic quadratic with closed-form `Φ`, least-squares AUC
//!   maximization, worst-group risk and MSPBE temporal-difference learning).
//! * [`optimizers`]: DP-SGDA, clipped mini-batch SGA and PrivateDiff Minimax.
//! * [`verification`]: brute-force sensitivity checks, smoothness probes and
//!   cross-seed variance statistics.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod error;
pub mod optimizers;
pub mod privacy;
pub mod problems;
pub mod rng;
pub mod verification;

pub use error::{Error, Result};
pub use optimizers::{OptimizerOutput, OptimizerTrace, RoundRecord};
pub use privacy::{NoiseScalesPrivateDiff, NoiseScalesSgda, PrivacyBudget};
pub use problems::{MinimaxProblem, ProblemConstants};

/// Dense column vector used for every iterate and gradient.
pub type Vector = nalgebra::DVector<f64>;
