use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Mat;
use crate::reduction::TokenLayout;
use crate::vit::LayerTrace;

use super::cka::linear_cka;
use super::filters::hf_norm;
use super::spectrum::{image_token_mean, paint_tokens};

/// Per-layer collapse metrics, aligned with the trace's blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    /// `||H_f[X_l]||_F` of each block output.
    pub hf_norm: Vec<f64>,
    /// `hf_norm[l+1] / hf_norm[l]`, or 0 when the denominator vanishes.
    pub lambda_hat: Vec<f64>,
    /// CKA of each layer's grid features against the last layer's.
    pub cka_to_last: Vec<f64>,
}

/// Image-token features laid out on the full grid in raster order
/// (`side^2 x d`), missing cells mean-filled.
pub fn grid_features(x: &Mat, layout: &TokenLayout) -> Result<Mat> {
    let fill = image_token_mean(x, layout)?;
    let grid = paint_tokens(x, layout, &layout.candidate_indices(), &fill)?;
    let side = grid.side();
    Mat::from_vec(side * side, grid.channels(), grid.values().to_vec())
}

/// Linear CKA, except that degenerate (constant) inputs score 1 when equal
/// and 0 otherwise.
pub fn cka_or_degenerate(x: &Mat, y: &Mat) -> Result<f64> {
    match linear_cka(x, y) {
        Ok(v) => Ok(v),
        Err(Error::Degenerate(_)) => Ok(if x == y { 1.0 } else { 0.0 }),
        Err(e) => Err(e),
    }
}

pub fn collapse_report(trace: &LayerTrace) -> Result<CollapseReport> {
    let last = trace.layers.last().ok_or_else(|| Error::InvalidArgument("empty trace".into()))?;
    let hf: Vec<f64> = trace.layers.iter().map(|l| hf_norm(&l.output)).collect();
    let lambda_hat = hf.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect();
    let last_grid = grid_features(&last.output, &last.layout)?;
    let cka_to_last = trace
        .layers
        .iter()
        .map(|l| cka_or_degenerate(&grid_features(&l.output, &l.layout)?, &last_grid))
        .collect::<Result<_>>()?;
    Ok(CollapseReport { hf_norm: hf, lambda_hat, cka_to_last })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;
    use crate::vit::LayerRecord;

    fn record(layer: usize, x: Mat, layout: TokenLayout) -> LayerRecord {
        LayerRecord {
            layer,
            input: x.clone(),
            input_layout: layout.clone(),
            attention: Vec::new(),
            output: x,
            layout: layout.clone(),
            reduced: false,
        }
    }

    #[test]
    fn single_layer_has_no_ratio() {
        let l = TokenLayout::grid(3, true);
        let x = SeededRng::new(1, 0).normal_mat(10, 4, 1.0);
        let r = collapse_report(&LayerTrace { layers: vec![record(1, x, l)] }).unwrap();
        assert!(r.lambda_hat.is_empty());
        assert!((r.cka_to_last[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_layers_align_perfectly() {
        let l = TokenLayout::grid(4, true);
        let x = SeededRng::new(2, 0).normal_mat(17, 5, 1.0);
        let layers = (1..=4).map(|i| record(i, x.clone(), l.clone())).collect();
        let r = collapse_report(&LayerTrace { layers }).unwrap();
        assert!(r.cka_to_last.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(r.lambda_hat.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn empty_trace_is_error() {
        assert!(collapse_report(&LayerTrace::default()).is_err());
    }

    #[test]
    fn grid_features_fill_missing_cells() {
        let roles = vec![crate::reduction::TokenRole::Image { row: 0, col: 1 }];
        let l = TokenLayout::new(roles, 2, None).unwrap();
        let x = Mat::from_rows(&[vec![3.0]]).unwrap();
        assert_eq!(grid_features(&x, &l).unwrap().as_slice(), &[3.0; 4]);
    }
}
