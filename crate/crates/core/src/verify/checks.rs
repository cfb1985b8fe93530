//! Individual inequality and identity checks. Each returns a margin that is
//! nonnegative when the claim holds (`rhs - lhs`), or an error measure where
//! noted.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::freq::{decompose_attention, high_pass_center, hf_norm};
use crate::numeric::{dot, Mat};
use crate::reduction::{fused_reweighted_apply, reweight_attention};

fn sq_dev_sum(x: &Mat, rows: &[usize], center: &[f64]) -> f64 {
    rows.iter()
        .map(|&i| x.row(i).iter().zip(center).map(|(v, m)| (v - m) * (v - m)).sum::<f64>())
        .sum()
}

fn mean_of(x: &Mat, rows: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; x.cols()];
    for &i in rows {
        for (a, v) in m.iter_mut().zip(x.row(i)) {
            *a += v;
        }
    }
    m.iter_mut().for_each(|a| *a /= rows.len() as f64);
    m
}

/// Two-step chain for a token subset `S` with subset mean `μ'` and full mean `μ`:
/// `Σ_S ||x_i - μ'||² ≤ Σ_S ||x_i - μ||² ≤ Σ_all ||x_i - μ||²`.
/// Returns the smaller of the two step margins.
pub fn check_subset_variance(x: &Mat, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("subset must be nonempty".into()));
    }
    if let Some(&i) = subset.iter().find(|&&i| i >= x.rows()) {
        return Err(Error::InvalidArgument(format!("subset index {i} outside {} tokens", x.rows())));
    }
    let all: Vec<usize> = (0..x.rows()).collect();
    let mu = mean_of(x, &all);
    let mu_s = mean_of(x, subset);
    let a = sq_dev_sum(x, subset, &mu_s);
    let b = sq_dev_sum(x, subset, &mu);
    let c = sq_dev_sum(x, &all, &mu);
    Ok((b - a).min(c - b))
}

fn check_row_normalized(m: &Mat) -> Result<()> {
    if m.as_slice().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("reduction matrix has negative entries".into()));
    }
    if let Some(s) = m.row_sums().into_iter().find(|s| (s - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidArgument(format!("reduction matrix row sums to {s}")));
    }
    Ok(())
}

/// `||H_f[X]||_F² - ||H_f[MX]||_F²` for a row-normalized `M` with `n' ≤ n`.
pub fn check_convex_combination(x: &Mat, m: &Mat) -> Result<f64> {
    check_row_normalized(m)?;
    if m.cols() != x.rows() || m.rows() > m.cols() {
        return Err(shape_err!("reduction matrix {}x{} for {} tokens", m.rows(), m.cols(), x.rows()));
    }
    let lhs = hf_norm(&m.matmul(x)?).powi(2);
    let rhs = hf_norm(x).powi(2);
    Ok(rhs - lhs)
}

/// `||H_f[X]||_F - ||H_f[AX]||_F` for a row-stochastic `A`.
pub fn check_row_stochastic_contraction(a: &Mat, x: &Mat) -> Result<f64> {
    if a.rows() != a.cols() {
        return Err(shape_err!("attention map must be square"));
    }
    check_row_normalized(a)?;
    Ok(hf_norm(x) - hf_norm(&a.matmul(x)?))
}

fn mean_key(keys: &Mat) -> Result<Vec<f64>> {
    if keys.rows() == 0 {
        return Err(Error::InvalidArgument("at least one key required".into()));
    }
    Ok(keys.column_means())
}

/// Unnormalized scores: `Σ_i exp(s·q·k_i) - exp(s·q·k̄)`.
pub fn check_jensen_dc(q: &[f64], keys: &Mat, scale: f64) -> Result<f64> {
    if q.len() != keys.cols() {
        return Err(shape_err!("query of width {} against keys of width {}", q.len(), keys.cols()));
    }
    let kbar = mean_key(keys)?;
    let sum: f64 = keys.row_iter().map(|k| (scale * dot(q, k)).exp()).sum();
    Ok(sum - (scale * dot(q, &kbar)).exp())
}

/// Softmax-normalized comparison: total weight the LF keys receive next to
/// `other` keys, minus the weight of their mean key next to the same keys.
pub fn check_jensen_dc_normalized(q: &[f64], other: &Mat, lf: &Mat, scale: f64) -> Result<f64> {
    if q.len() != lf.cols() || (other.rows() > 0 && other.cols() != lf.cols()) {
        return Err(shape_err!("query and key widths differ"));
    }
    let kbar = mean_key(lf)?;
    let score = |k: &[f64]| scale * dot(q, k);
    let others: Vec<f64> = other.row_iter().map(score).collect();
    let lf_scores: Vec<f64> = lf.row_iter().map(score).collect();
    let dc = score(&kbar);
    let max = others.iter().chain(&lf_scores).chain(std::iter::once(&dc)).cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = |s: f64| (s - max).exp();
    let other_sum: f64 = others.iter().map(|&s| e(s)).sum();
    let lf_sum: f64 = lf_scores.iter().map(|&s| e(s)).sum();
    Ok(lf_sum / (other_sum + lf_sum) - e(dc) / (other_sum + e(dc)))
}

/// Largest relative deviation between the fused and materialized
/// reweighted products over all heads.
pub fn check_flash_identity(attn: &[Mat], values: &[Mat], dc_cols: &[usize], omega1: &[f64], omega2: &[f64]) -> Result<f64> {
    let h = attn.len();
    if values.len() != h || omega1.len() != h || omega2.len() != h {
        return Err(shape_err!("per-head inputs disagree on the head count"));
    }
    let mut worst: f64 = 0.0;
    for i in 0..h {
        let fused = fused_reweighted_apply(&attn[i], &values[i], dc_cols, omega1[i], omega2[i])?;
        let direct = reweight_attention(&attn[i], dc_cols, omega1[i], omega2[i])?.matmul(&values[i])?;
        let scale = direct.max_abs();
        let err = fused.sub(&direct)?.max_abs();
        worst = worst.max(if scale > 0.0 { err / scale } else { err });
    }
    Ok(worst)
}

/// Low-pass characterization of one attention map: largest error among the
/// rank-one form of `A_LP`, its idempotence, the vanishing high-pass residue
/// `H_f[A_LP X]`, the broadcast-mean identity and `H_f[AX] = H_f[A_HP X]`.
pub fn check_low_pass(a: &Mat, x: &Mat) -> Result<f64> {
    let (low, high) = decompose_attention(a)?;
    let n = a.rows();
    let first = low[(0, 0)];
    let rank_one = low.as_slice().iter().map(|v| (v - first).abs()).fold(0.0, f64::max);
    let idempotent = low.matmul(&low)?.sub(&low)?.max_abs();
    let lx = low.matmul(x)?;
    let residue = high_pass_center(&lx).max_abs();
    let mean = x.column_means();
    let broadcast = Mat::from_fn(n, x.cols(), |_, j| mean[j]);
    let mean_err = lx.sub(&broadcast)?.max_abs();
    let hp = high_pass_center(&a.matmul(x)?).sub(&high_pass_center(&high.matmul(x)?))?.max_abs();
    Ok([rank_one, idempotent, residue, mean_err, hp].into_iter().fold(0.0, f64::max))
}

/// Which attention the reduced side of the end-to-end check uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionRegime {
    /// Attention recomputed over the reduced tokens `MX`.
    Recomputed,
    /// The full-sequence attention `A` is shared: `M A X W_V` vs `A X W_V`.
    SharedAttention,
}

/// Single-head attention parameters for the end-to-end check.
#[derive(Clone, Debug)]
pub struct HeadWeights {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
}

impl HeadWeights {
    fn attention(&self, x: &Mat) -> Result<Mat> {
        let q = x.matmul(&self.wq)?;
        let k = x.matmul(&self.wk)?;
        let scale = 1.0 / (self.wq.cols() as f64).sqrt();
        Ok(q.matmul_transposed(&k)?.scale(scale).row_softmax())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HfNormMargin {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// `||H_f[SA(X)]||_F - ||H_f[SA(MX)]||_F` under the chosen regime, for a
/// binary row-selection or row-normalized `M`.
pub fn check_reduced_hf_norm(x: &Mat, m: &Mat, w: &HeadWeights, regime: ReductionRegime) -> Result<HfNormMargin> {
    check_row_normalized(m)?;
    if m.cols() != x.rows() || m.rows() > m.cols() {
        return Err(shape_err!("reduction matrix {}x{} for {} tokens", m.rows(), m.cols(), x.rows()));
    }
    let a = w.attention(x)?;
    let full = a.matmul(x)?.matmul(&w.wv)?;
    let reduced = match regime {
        ReductionRegime::Recomputed => {
            let mx = m.matmul(x)?;
            w.attention(&mx)?.matmul(&mx)?.matmul(&w.wv)?
        }
        ReductionRegime::SharedAttention => m.matmul(&full)?,
    };
    let lhs = hf_norm(&reduced);
    let rhs = hf_norm(&full);
    Ok(HfNormMargin { lhs, rhs, margin: rhs - lhs })
}
