//! Privacy primitives: clipping, Gaussian noise, the moments accountant and
//! closed-form noise calibration for both optimizers.

mod accountant;
mod calibration;
mod mechanism;

pub use accountant::{
    delta_for_epsilon, gaussian_log_moment, log_moment_subsampled, verify_budget, AccountantConfig, AccountantLedger,
    BudgetReport, LogMomentEntry, Mechanism, SubsampledMechanismSpec, DEFAULT_LAMBDA_MAX,
};
pub use calibration::{
    calibrate_privatediff, calibrate_sgda, certify_scale, privatediff_batch_size, sgda_batch_size,
    NoiseScalesPrivateDiff, NoiseScalesSgda, PrivacyBudget,
};
pub use mechanism::{clip, clip_in_place, gaussian_perturb, gaussian_perturb_in_place};
