//! Numerical certification of the reduction inequalities and identities.

pub mod checks;
mod suite;

pub use checks::{
    check_convex_combination, check_flash_identity, check_jensen_dc, check_jensen_dc_normalized, check_low_pass,
    check_reduced_hf_norm, check_row_stochastic_contraction, check_subset_variance, HeadWeights, HfNormMargin, ReductionRegime,
};
pub use suite::{check_names, random_attention, run_suite, CheckResult, VerificationReport, EXACT_TOLERANCE, FLASH_TOLERANCE};
