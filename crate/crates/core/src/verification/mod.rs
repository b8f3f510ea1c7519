//! Independent checks of the analysis-level claims: neighbouring-dataset
//! sensitivity, inner-ascent stability, measured smoothness and cross-seed
//! variance of optimizer traces. Every report serializes to JSON.

mod sensitivity;
mod smoothness;
mod variance;

pub use sensitivity::{
    clipped_batch_mean, sensitivity_bruteforce, sga_stability_bound, sga_stability_check, NeighborPair,
    SensitivityReport, MAX_BRUTEFORCE_N,
};
pub use smoothness::{smoothness_probe, ProbeConfig, SmoothnessReport};
pub use variance::{variance_stats, VarianceReport};
