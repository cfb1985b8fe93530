use crate::error::{shape_err, Error, Result};
use crate::numeric::Mat;
use crate::reduction::fused_reweighted_apply;

use super::LayerWeights;

/// Per-head reweighting applied inside attention: DC-token columns and the
/// `(omega1, omega2)` pair of each head.
#[derive(Clone, Copy, Debug)]
pub struct Reweighting<'a> {
    pub dc_cols: &'a [usize],
    pub omega1: &'a [f64],
    pub omega2: &'a [f64],
}

fn project(x: &Mat, w: &Mat, b: &[f64]) -> Result<Mat> {
    let mut out = x.matmul(w)?;
    out.add_row_vector(b)?;
    Ok(out)
}

/// Multi-head self-attention. Returns the projected output and the raw
/// post-softmax map of every head; reweighting only changes the output.
pub fn self_attention_reweighted(
    x: &Mat,
    w: &LayerWeights,
    heads: usize,
    reweight: Option<Reweighting<'_>>,
) -> Result<(Mat, Vec<Mat>)> {
    if !x.is_finite() {
        return Err(Error::NonFinite("attention input"));
    }
    let d = x.cols();
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(shape_err!("{d} features cannot split into {heads} heads"));
    }
    if x.rows() == 0 {
        return Err(shape_err!("attention over zero tokens"));
    }
    if let Some(r) = &reweight {
        if r.omega1.len() != heads || r.omega2.len() != heads {
            return Err(shape_err!("omega vectors must have {heads} entries"));
        }
    }
    let dk = d / heads;
    let q = project(x, &w.wq, &w.bq)?;
    let k = project(x, &w.wk, &w.bk)?;
    let v = project(x, &w.wv, &w.bv)?;
    let scale = 1.0 / (dk as f64).sqrt();
    let mut concat = Mat::zeros(x.rows(), d);
    let mut maps = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = q.column_block(h * dk, dk);
        let kh = k.column_block(h * dk, dk);
        let vh = v.column_block(h * dk, dk);
        let a = qh.matmul_transposed(&kh)?.scale(scale).row_softmax();
        let out = match &reweight {
            Some(r) => fused_reweighted_apply(&a, &vh, r.dc_cols, r.omega1[h], r.omega2[h])?,
            None => a.matmul(&vh)?,
        };
        concat.set_column_block(h * dk, &out);
        maps.push(a);
    }
    let out = project(&concat, &w.wo, &w.bo)?;
    Ok((out, maps))
}

pub fn self_attention(x: &Mat, w: &LayerWeights, heads: usize) -> Result<(Mat, Vec<Mat>)> {
    self_attention_reweighted(x, w, heads, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;
    use crate::vit::{init_weights, ModelConfig};

    fn layer(d: usize, heads: usize, seed: u64) -> LayerWeights {
        let c = ModelConfig::new(1, d, heads).with_grid(2, 1, 1);
        init_weights(&c, &SeededRng::new(seed, 0)).layers.remove(0)
    }

    #[test]
    fn single_token_attends_to_itself() {
        let w = layer(4, 2, 1);
        let x = SeededRng::new(2, 0).normal_mat(1, 4, 1.0);
        let (_, maps) = self_attention(&x, &w, 2).unwrap();
        assert!(maps.iter().all(|a| a.as_slice() == [1.0]));
    }

    #[test]
    fn zero_query_key_gives_uniform_rows() {
        let mut w = layer(6, 3, 3);
        w.wq = Mat::zeros(6, 6);
        w.wk = Mat::zeros(6, 6);
        let x = SeededRng::new(4, 0).normal_mat(5, 6, 1.0);
        let (_, maps) = self_attention(&x, &w, 3).unwrap();
        for a in maps {
            assert!(a.as_slice().iter().all(|v| (v - 0.2).abs() < 1e-15));
        }
    }

    // Scalar-loop reference written independently of the matrix helpers.
    fn brute_force(x: &Mat, w: &LayerWeights, heads: usize) -> Mat {
        let (n, d) = x.shape();
        let dk = d / heads;
        let lin = |m: &Mat, b: &[f64], i: usize, j: usize| -> f64 {
            let mut s = b[j];
            for t in 0..d {
                s += x[(i, t)] * m[(t, j)];
            }
            s
        };
        let mut concat = vec![vec![0.0; d]; n];
        for h in 0..heads {
            for i in 0..n {
                let mut logits = vec![0.0; n];
                for (j, l) in logits.iter_mut().enumerate() {
                    for c in h * dk..(h + 1) * dk {
                        *l += lin(&w.wq, &w.bq, i, c) * lin(&w.wk, &w.bk, j, c);
                    }
                    *l /= (dk as f64).sqrt();
                }
                let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = logits.iter().map(|l| (l - mx).exp()).sum();
                for (j, l) in logits.iter().enumerate() {
                    let p = (l - mx).exp() / z;
                    for c in h * dk..(h + 1) * dk {
                        concat[i][c] += p * lin(&w.wv, &w.bv, j, c);
                    }
                }
            }
        }
        Mat::from_fn(n, d, |i, j| w.bo[j] + (0..d).map(|t| concat[i][t] * w.wo[(t, j)]).sum::<f64>())
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut w = layer(8, 2, 5);
        let mut rng = SeededRng::new(6, 0);
        w.bq = rng.normal_vec(8, 0.1);
        w.bv = rng.normal_vec(8, 0.1);
        w.bo = rng.normal_vec(8, 0.1);
        let x = rng.normal_mat(3, 8, 1.0);
        let (out, maps) = self_attention(&x, &w, 2).unwrap();
        let expected = brute_force(&x, &w, 2);
        assert!(out.sub(&expected).unwrap().max_abs() < 1e-10);
        for a in maps {
            for s in a.row_sums() {
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_omega_matches_plain() {
        let w = layer(8, 4, 7);
        let x = SeededRng::new(8, 0).normal_mat(9, 8, 1.0);
        let zeros = [0.0; 4];
        let rw = Reweighting { dc_cols: &[7, 8], omega1: &zeros, omega2: &zeros };
        let (a, _) = self_attention(&x, &w, 4).unwrap();
        let (b, _) = self_attention_reweighted(&x, &w, 4, Some(rw)).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let w = layer(4, 1, 9);
        let mut x = Mat::zeros(2, 4);
        x[(1, 1)] = f64::NAN;
        assert!(matches!(self_attention(&x, &w, 1), Err(Error::NonFinite(_))));
    }
}
