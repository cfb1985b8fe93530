use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Mat;

use super::baselines::{apply_candidate_matrix, baseline_merge, baseline_pool, baseline_prune_cls};
use super::dc::apply_reduction;
use super::layout::TokenLayout;
use super::schedule::ReductionStep;

/// Hook called by the forward pass at every scheduled layer with the tokens
/// after the attention residual and that layer's attention maps.
pub trait Reducer: Sync {
    fn reduce(&self, x: &Mat, attn: &[Mat], layout: &TokenLayout, step: &ReductionStep) -> Result<(Mat, TokenLayout)>;
}

/// Which reduction method a step uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReducerKind {
    #[default]
    FrequencyAware,
    PruneCls,
    Merge,
    Pool,
}

impl ReducerKind {
    pub const ALL: [ReducerKind; 4] =
        [ReducerKind::FrequencyAware, ReducerKind::PruneCls, ReducerKind::Merge, ReducerKind::Pool];

    pub fn name(self) -> &'static str {
        match self {
            ReducerKind::FrequencyAware => "frequency-aware",
            ReducerKind::PruneCls => "prune-cls",
            ReducerKind::Merge => "merge",
            ReducerKind::Pool => "pool",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Non-CLS token count the frequency-aware step would produce on a fresh
/// grid: kept HF tokens plus one DC token per window.
pub fn matched_budget(candidates: usize, step: &ReductionStep) -> usize {
    (step.keep_count(candidates) + step.window * step.window).min(candidates)
}

impl Reducer for ReducerKind {
    fn reduce(&self, x: &Mat, attn: &[Mat], layout: &TokenLayout, step: &ReductionStep) -> Result<(Mat, TokenLayout)> {
        match self {
            ReducerKind::FrequencyAware => {
                let out = apply_reduction(x, attn, layout, step)?;
                Ok((out.tokens, out.layout))
            }
            ReducerKind::PruneCls => {
                let candidates = layout.candidate_indices();
                let keep = matched_budget(candidates.len(), step);
                let full = baseline_prune_cls(attn, layout, keep)?;
                let m = Mat::from_fn(full.rows(), candidates.len(), |r, c| full[(r, candidates[c])]);
                apply_candidate_matrix(x, layout, &m)
            }
            ReducerKind::Merge => {
                let candidates = layout.candidate_indices();
                if candidates.is_empty() {
                    return Err(Error::Layout("no tokens to merge".into()));
                }
                let target = matched_budget(candidates.len(), step).max(1);
                let m = baseline_merge(&x.select_rows(&candidates), target)?;
                apply_candidate_matrix(x, layout, &m)
            }
            ReducerKind::Pool => baseline_pool(x, layout, step.window),
        }
    }
}
