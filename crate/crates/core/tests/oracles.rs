//! Library results against independent reference computations.

use std::f64::consts::PI;

use freqtoken::cost::mac_count;
use freqtoken::freq::{decompose_attention, high_pass_center};
use freqtoken::io::{gen_synthetic, Grating, SyntheticRecipe};
use freqtoken::numeric::{dft2, Grid2D, Mat, SeededRng};
use freqtoken::reduction::{fused_reweighted_apply, ReductionSchedule};
use freqtoken::verify::{check_convex_combination, check_row_stochastic_contraction, random_attention};
use freqtoken::vit::ModelConfig;

#[test]
fn dft_matches_direct_sum() {
    let side = 5;
    let mut rng = SeededRng::new(11, 0);
    let g = Grid2D::new(side, 2, rng.normal_vec(side * side * 2, 1.0)).unwrap();
    let spec = dft2(&g);
    for u in 0..side {
        for v in 0..side {
            for ch in 0..2 {
                let (mut re, mut im) = (0.0, 0.0);
                for r in 0..side {
                    for c in 0..side {
                        let t = -2.0 * PI * ((u * r + v * c) as f64) / side as f64;
                        re += g.get(r, c, ch) * t.cos();
                        im += g.get(r, c, ch) * t.sin();
                    }
                }
                let z = spec.get(u, v, ch);
                assert!((z.re - re).abs() < 1e-9 && (z.im - im).abs() < 1e-9, "({u},{v},{ch})");
            }
        }
    }
}

#[test]
fn grating_energy_sits_on_its_two_bins() {
    let side = 12;
    let recipe = SyntheticRecipe { gratings: vec![Grating { u: 2, v: 3, amplitude: 1.5, phase: Some(0.4) }], noise_sigma: 0.0 };
    let img = &gen_synthetic(&recipe, side, 1, 1, 0).unwrap()[0];
    let spec = dft2(img);
    let peak = 1.5 * (side * side) as f64 / 2.0;
    for u in 0..side {
        for v in 0..side {
            let mag = spec.get(u, v, 0).norm();
            let on = (u, v) == (2, 3) || (u, v) == (side - 2, side - 3);
            let want = if on { peak } else { 0.0 };
            assert!((mag - want).abs() < 1e-9, "bin ({u},{v}) = {mag}");
        }
    }
}

#[test]
fn fused_reweighting_matches_split_form() {
    let mut rng = SeededRng::new(3, 0);
    for trial in 0..50 {
        let n = 3 + trial % 9;
        let a = random_attention(&mut rng, n, 4);
        let v = rng.normal_mat(n, 5, 1.0);
        let dc: Vec<usize> = (0..n).filter(|j| (j + trial) % 3 == 0).collect();
        let (w1, w2) = (rng.uniform_range(-1.0, 2.0), rng.uniform_range(-1.0, 2.0));
        // A_LP + (w1 + 1) A_HP + (w2 - w1) A_DC
        let (lp, hp) = decompose_attention(&a).unwrap();
        let mut hat = lp.add(&hp.scale(w1 + 1.0)).unwrap();
        for i in 0..n {
            for &j in &dc {
                hat[(i, j)] += (w2 - w1) * a[(i, j)];
            }
        }
        let want = hat.matmul(&v).unwrap();
        let got = fused_reweighted_apply(&a, &v, &dc, w1, w2).unwrap();
        let err = got.sub(&want).unwrap().frobenius_norm() / want.frobenius_norm();
        assert!(err < 1e-12, "trial {trial}: {err}");
    }
}

#[test]
fn low_pass_is_broadcast_mean() {
    let mut rng = SeededRng::new(5, 0);
    let a = random_attention(&mut rng, 7, 3);
    let x = rng.normal_mat(7, 4, 2.0);
    let (lp, _) = decompose_attention(&a).unwrap();
    let y = lp.matmul(&x).unwrap();
    for j in 0..4 {
        let mean: f64 = (0..7).map(|i| x[(i, j)]).sum::<f64>() / 7.0;
        for i in 0..7 {
            assert!((y[(i, j)] - mean).abs() < 1e-12);
        }
    }
    assert!(high_pass_center(&y).max_abs() < 1e-12);
}

#[test]
fn deit_s_three_stage_hand_count() {
    let (d, hidden) = (384.0, 1536.0);
    // (tokens at attention, tokens at the FFN) per block
    let mut counts = vec![(197.0, 197.0); 3];
    counts.push((197.0, 142.0));
    counts.extend([(142.0, 142.0), (142.0, 142.0), (142.0, 97.0), (97.0, 97.0), (97.0, 97.0), (97.0, 68.0), (68.0, 68.0), (68.0, 68.0)]);
    let blocks: f64 = counts.iter().map(|&(n, m)| 4.0 * n * d * d + 2.0 * n * n * d + 2.0 * m * d * hidden).sum();
    let want = blocks + 196.0 * d * (16.0 * 16.0 * 3.0) + d * 1000.0;
    let got = mac_count(&ModelConfig::deit_small(), &ReductionSchedule::three_stage()).unwrap().total_macs;
    assert!((got - want).abs() / want < 1e-12, "{got} vs {want}");
}

/// A row-stochastic map can raise the high-pass norm: rows e1, e1, e2 send
/// x = (0, 1, 0.5) to (0, 0, 1).
#[test]
fn row_stochastic_maps_need_not_contract() {
    let a = Mat::from_rows(&[vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
    let x = Mat::from_rows(&[vec![0.0], vec![1.0], vec![0.5]]).unwrap();
    let margin = check_row_stochastic_contraction(&a, &x).unwrap();
    let want = 0.5f64.sqrt() - (2.0f64 / 3.0).sqrt();
    assert!((margin - want).abs() < 1e-12, "{margin}");
    assert!(margin < 0.0);
}

/// Merging onto the extremes can raise the high-pass energy: x = (-1, 0, 0, 0, 1)
/// has energy 2, while four rows picking -1, -1, 1, 1 have energy 4.
#[test]
fn convex_merges_need_not_shrink_energy() {
    let x = Mat::from_rows(&[vec![-1.0], vec![0.0], vec![0.0], vec![0.0], vec![1.0]]).unwrap();
    let pick = |j: usize| (0..5).map(|c| (c == j) as u8 as f64).collect::<Vec<f64>>();
    let m = Mat::from_rows(&[pick(0), pick(0), pick(4), pick(4)]).unwrap();
    let margin = check_convex_combination(&x, &m).unwrap();
    assert!((margin + 2.0).abs() < 1e-12, "{margin}");
}
