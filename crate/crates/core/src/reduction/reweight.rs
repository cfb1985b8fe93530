//! Attention reweighting that emphasizes the high-pass part of the map and
//! rescales the columns of DC tokens:
//!
//! `Â = (ω₁+1)·A − ω₁·A_LP − (ω₁−ω₂)·A_DC`
//!
//! where `A_LP = 11ᵀ/n` and `A_DC` keeps only the DC-token columns of `A`.
//! This equals `A_LP + (ω₁+1)·A_HP + (ω₂−ω₁)·A_DC` and reduces to `A` when
//! both parameters are zero. Rows are not renormalized.

use crate::error::{shape_err, Result};
use crate::numeric::Mat;

fn check(a: &Mat, dc_cols: &[usize]) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(shape_err!("attention map must be square, got {}x{}", a.rows(), a.cols()));
    }
    if let Some(&c) = dc_cols.iter().find(|&&c| c >= a.cols()) {
        return Err(shape_err!("DC column {c} outside {} tokens", a.cols()));
    }
    Ok(())
}

/// Materialized `Â` for one head.
pub fn reweight_attention(a: &Mat, dc_cols: &[usize], omega1: f64, omega2: f64) -> Result<Mat> {
    check(a, dc_cols)?;
    let n = a.rows();
    let low = 1.0 / n as f64;
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = (omega1 + 1.0) * a[(i, j)] - omega1 * low;
        }
        for &j in dc_cols {
            out[(i, j)] -= (omega1 - omega2) * a[(i, j)];
        }
    }
    Ok(out)
}

/// `Â·V` without forming `Â`: one pass over `A·V` plus a broadcast token mean
/// and a rank-|DC| correction.
pub fn fused_reweighted_apply(a: &Mat, v: &Mat, dc_cols: &[usize], omega1: f64, omega2: f64) -> Result<Mat> {
    check(a, dc_cols)?;
    let mut out = a.matmul(v)?;
    if omega1 == 0.0 && omega2 == 0.0 {
        return Ok(out);
    }
    let mean = v.column_means();
    let gain = omega1 + 1.0;
    let dc_gain = omega1 - omega2;
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        for (o, m) in row.iter_mut().zip(&mean) {
            *o = gain * *o - omega1 * m;
        }
        for &j in dc_cols {
            let w = dc_gain * a[(i, j)];
            for (o, vj) in row.iter_mut().zip(v.row(j)) {
                *o -= w * vj;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq::decompose_attention;
    use crate::numeric::SeededRng;

    #[test]
    fn zero_omega_is_identity() {
        let mut rng = SeededRng::new(1, 0);
        let a = rng.softmax_mat(7, 7, 1.0);
        assert_eq!(reweight_attention(&a, &[2, 5], 0.0, 0.0).unwrap(), a);
        let v = rng.normal_mat(7, 3, 1.0);
        assert_eq!(fused_reweighted_apply(&a, &v, &[2, 5], 0.0, 0.0).unwrap(), a.matmul(&v).unwrap());
    }

    #[test]
    fn no_dc_tokens_scales_high_pass() {
        let mut rng = SeededRng::new(2, 0);
        let a = rng.softmax_mat(5, 5, 1.0);
        let c = 0.7;
        let (low, high) = decompose_attention(&a).unwrap();
        let expected = low.add(&high.scale(c + 1.0)).unwrap();
        let got = reweight_attention(&a, &[], c, -0.3).unwrap();
        assert!(got.sub(&expected).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn additive_form_agrees() {
        // A_LP + (w1+1) A_HP + (w2-w1) A_DC
        let mut rng = SeededRng::new(3, 0);
        let a = rng.softmax_mat(6, 6, 1.0);
        let dc = [1, 4];
        let (w1, w2) = (0.4, -0.25);
        let (low, high) = decompose_attention(&a).unwrap();
        let mut expected = low.add(&high.scale(w1 + 1.0)).unwrap();
        for i in 0..6 {
            for &j in &dc {
                expected[(i, j)] += (w2 - w1) * a[(i, j)];
            }
        }
        let got = reweight_attention(&a, &dc, w1, w2).unwrap();
        assert!(got.sub(&expected).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn fused_matches_direct() {
        let mut rng = SeededRng::new(4, 0);
        let n = 16;
        let dc = [3, 9, 15];
        for _ in 0..4 {
            let a = rng.softmax_mat(n, n, 1.0);
            let v = rng.normal_mat(n, 8, 1.0);
            let (w1, w2) = (rng.normal(), rng.normal());
            let direct = reweight_attention(&a, &dc, w1, w2).unwrap().matmul(&v).unwrap();
            let fused = fused_reweighted_apply(&a, &v, &dc, w1, w2).unwrap();
            let err = fused.sub(&direct).unwrap().max_abs() / direct.max_abs();
            assert!(err < 1e-10, "{err}");
        }
    }

    #[test]
    fn zero_values_give_zero() {
        let mut rng = SeededRng::new(5, 0);
        let a = rng.softmax_mat(4, 4, 1.0);
        let out = fused_reweighted_apply(&a, &Mat::zeros(4, 2), &[1], 0.5, 0.2).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn affine_in_omega() {
        let mut rng = SeededRng::new(6, 0);
        let a = rng.softmax_mat(8, 8, 1.0);
        let dc = [0, 5];
        let h = 0.37;
        let at = |w1: f64, w2: f64| reweight_attention(&a, &dc, w1, w2).unwrap();
        let (w1, w2) = (0.2, -0.6);
        for (d1, d2) in [(h, 0.0), (0.0, h), (h, h)] {
            let second = at(w1 + 2.0 * d1, w2 + 2.0 * d2)
                .sub(&at(w1 + d1, w2 + d2).scale(2.0))
                .unwrap()
                .add(&at(w1, w2))
                .unwrap();
            assert!(second.max_abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_columns() {
        assert!(reweight_attention(&Mat::identity(3), &[3], 0.1, 0.1).is_err());
        assert!(fused_reweighted_apply(&Mat::zeros(2, 3), &Mat::zeros(3, 1), &[], 0.0, 0.0).is_err());
    }
}
