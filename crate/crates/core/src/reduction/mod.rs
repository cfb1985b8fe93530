//! Frequency-aware token reduction and comparison baselines.

pub mod baselines;
pub mod dc;
pub mod layout;
pub mod reducer;
pub mod reweight;
pub mod schedule;
pub mod select;

pub use baselines::{apply_candidate_matrix, baseline_merge, baseline_pool, baseline_prune_cls};
pub use dc::{apply_reduction, make_dc_tokens, partition_windows, window_group, DcState, DcToken, ReductionOutcome};
pub use layout::{Cell, TokenLayout, TokenRole};
pub use reducer::{matched_budget, Reducer, ReducerKind};
pub use reweight::{fused_reweighted_apply, reweight_attention};
pub use schedule::{ReductionSchedule, ReductionStep};
pub use select::{select_hf_lf, token_importance, SelectionMode, SelectionResult};
