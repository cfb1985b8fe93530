use crate::error::{shape_err, Error, Result};
use crate::numeric::Mat;

use super::high_pass_center;

/// Linear centered kernel alignment between two feature matrices over the
/// same tokens: `||Yc^T Xc||_F^2 / (||Xc^T Xc||_F ||Yc^T Yc||_F)`.
///
/// Errors when either input has no variance across tokens.
pub fn linear_cka(x: &Mat, y: &Mat) -> Result<f64> {
    if x.rows() != y.rows() {
        return Err(shape_err!("CKA over {} vs {} tokens", x.rows(), y.rows()));
    }
    let xc = high_pass_center(x);
    let yc = high_pass_center(y);
    // Relative cutoff: centering a constant matrix leaves rounding noise.
    let degenerate = |m: &Mat, c: &Mat| c.frobenius_norm() <= 1e-12 * m.frobenius_norm().max(f64::MIN_POSITIVE);
    if degenerate(x, &xc) || degenerate(y, &yc) {
        return Err(Error::Degenerate("CKA input has zero variance across tokens".into()));
    }
    let xtx = xc.transpose().matmul(&xc)?;
    let yty = yc.transpose().matmul(&yc)?;
    let ytx = yc.transpose().matmul(&xc)?;
    let num = ytx.frobenius_norm().powi(2);
    let den = xtx.frobenius_norm() * yty.frobenius_norm();
    Ok((num / den).clamp(0.0, 1.0))
}
