use crate::error::{shape_err, Error, Result};
use crate::numeric::{dot, Mat, SeededRng};

/// Mean-centered features `(I - 11^T/n) X`: the high-pass part of `X`.
pub fn high_pass_center(x: &Mat) -> Mat {
    let means = x.column_means();
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (v, m) in out.row_mut(i).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    out
}

/// `||H_f[X]||_F`.
pub fn hf_norm(x: &Mat) -> f64 {
    high_pass_center(x).frobenius_norm()
}

/// Splits an attention map into the uniform low-pass part `11^T/n` and the
/// high-pass residual `A - 11^T/n`.
pub fn decompose_attention(a: &Mat) -> Result<(Mat, Mat)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(shape_err!("attention map must be square, got {}x{}", n, a.cols()));
    }
    let low = Mat::filled(n, n, 1.0 / n as f64);
    let high = a.sub(&low)?;
    Ok((low, high))
}

/// Cosine similarity of each token to the token mean. Zero vectors score 0.
pub fn dc_similarity(x: &Mat) -> Vec<f64> {
    let mean = x.column_means();
    let mean_norm = dot(&mean, &mean).sqrt();
    x.row_iter()
        .map(|row| {
            let norm = dot(row, row).sqrt();
            if norm == 0.0 || mean_norm == 0.0 {
                0.0
            } else {
                dot(row, &mean) / (norm * mean_norm)
            }
        })
        .collect()
}

/// Adds `N(0, sigma^2)` noise to every entry of the selected tokens.
pub fn awgn_probe(x: &Mat, indices: &[usize], sigma: f64, rng: &mut SeededRng) -> Result<Mat> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise sigma {sigma} must be >= 0")));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= x.rows()) {
        return Err(Error::InvalidArgument(format!("token {bad} out of range for {} tokens", x.rows())));
    }
    let mut out = x.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    for &i in indices {
        for v in out.row_mut(i) {
            *v += sigma * rng.normal();
        }
    }
    Ok(out)
}
