use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numeric::Mat;

/// Per-candidate importance `Ã_k`: the column mean of the high-pass
/// attention map `A − 11ᵀ/n`, averaged over heads and all query rows.
///
/// Every current token is a query; only `candidates` are scored. The result
/// is aligned with `candidates`.
pub fn token_importance(attn: &[Mat], candidates: &[usize]) -> Result<Vec<f64>> {
    let first = attn.first().ok_or_else(|| Error::InvalidArgument("no attention heads".into()))?;
    let n = first.rows();
    if attn.iter().any(|a| a.shape() != (n, n)) {
        return Err(shape_err!("attention heads must all be {n}x{n}"));
    }
    if let Some(&k) = candidates.iter().find(|&&k| k >= n) {
        return Err(shape_err!("candidate {k} outside {n} tokens"));
    }
    let low = 1.0 / n as f64;
    let scale = 1.0 / (n * attn.len()) as f64;
    let mut col = vec![0.0; n];
    for a in attn {
        for row in a.row_iter() {
            for (c, v) in col.iter_mut().zip(row) {
                *c += v - low;
            }
        }
    }
    Ok(candidates.iter().map(|&k| col[k] * scale).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Top-r as HF and bottom-r as LF.
    Analysis,
    /// Top-r as HF, every other candidate as LF.
    Reduction,
}

/// HF/LF split of the candidate tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Token indices with their importance, aligned with the candidate list.
    pub tokens: Vec<usize>,
    pub importance: Vec<f64>,
    /// HF token indices, ascending.
    pub hf: Vec<usize>,
    /// LF token indices: by ascending importance in analysis mode, ascending
    /// index in reduction mode.
    pub lf: Vec<usize>,
}

// Descending importance, lower index first on ties.
fn rank_order(importance: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].partial_cmp(&importance[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    order
}

/// Splits `tokens` (with aligned `importance`) into HF and LF sets of the
/// `r` highest / lowest scores. Ties go to the lower original position in
/// both directions.
pub fn select_hf_lf(tokens: &[usize], importance: &[f64], r: usize, mode: SelectionMode) -> Result<SelectionResult> {
    if tokens.len() != importance.len() {
        return Err(shape_err!("{} tokens with {} scores", tokens.len(), importance.len()));
    }
    if r > tokens.len() {
        return Err(Error::InvalidArgument(format!("r = {r} exceeds {} candidates", tokens.len())));
    }
    if r == 0 && mode == SelectionMode::Reduction {
        return Err(Error::InvalidArgument("r = 0 would drop every image token".into()));
    }
    let order = rank_order(importance);
    let mut hf: Vec<usize> = order[..r].iter().map(|&p| tokens[p]).collect();
    hf.sort_unstable();
    let lf = match mode {
        SelectionMode::Analysis => {
            let mut asc: Vec<usize> = (0..importance.len()).collect();
            asc.sort_by(|&a, &b| importance[a].partial_cmp(&importance[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
            asc[..r].iter().map(|&p| tokens[p]).collect()
        }
        SelectionMode::Reduction => {
            let mut rest: Vec<usize> = order[r..].iter().map(|&p| tokens[p]).collect();
            rest.sort_unstable();
            rest
        }
    };
    Ok(SelectionResult { tokens: tokens.to_vec(), importance: importance.to_vec(), hf, lf })
}
