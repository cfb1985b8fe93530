//! 2D discrete Fourier transform over square token grids.
//!
//! Grids here are at most a few dozen tokens on a side, so the transform is
//! computed directly (rows, then columns) from a precomputed twiddle table.
//! Forward is unnormalized; the inverse divides by `side^2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};

/// Square grid of `side x side` cells with `channels` values per cell.
///
/// Values are stored cell-major: `values[(row * side + col) * channels + ch]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    side: usize,
    channels: usize,
    values: Vec<f64>,
}

impl Grid2D {
    pub fn new(side: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if side == 0 || channels == 0 {
            return Err(shape_err!("grid needs side >= 1 and channels >= 1"));
        }
        if values.len() != side * side * channels {
            return Err(shape_err!(
                "{} values for a {side}x{side}x{channels} grid",
                values.len()
            ));
        }
        Ok(Self { side, channels, values })
    }

    pub fn zeros(side: usize, channels: usize) -> Self {
        Self { side, channels, values: vec![0.0; side * side * channels] }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.values[(row * self.side + col) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, v: f64) {
        self.values[(row * self.side + col) * self.channels + ch] = v;
    }

    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.side + col) * self.channels;
        &self.values[start..start + self.channels]
    }

    pub fn cell_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let start = (row * self.side + col) * self.channels;
        &mut self.values[start..start + self.channels]
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Complex spectrum with the same cell-major layout as [`Grid2D`].
#[derive(Clone, Debug)]
pub struct Spectrum {
    side: usize,
    channels: usize,
    bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize, ch: usize) -> Complex64 {
        self.bins[(u * self.side + v) * self.channels + ch]
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    /// Sum of `|F|^2` over all bins and channels.
    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Signed frequency of DFT index `k` on a length-`side` axis, in `(-side/2, side/2]`.
#[inline]
pub fn signed_frequency(k: usize, side: usize) -> i64 {
    if 2 * k <= side {
        k as i64
    } else {
        k as i64 - side as i64
    }
}

/// Chebyshev radial index `max(|u|, |v|)` of bin `(u, v)`.
#[inline]
pub fn radial_index(u: usize, v: usize, side: usize) -> usize {
    signed_frequency(u, side).unsigned_abs().max(signed_frequency(v, side).unsigned_abs()) as usize
}

fn twiddles(side: usize, sign: f64) -> Vec<Complex64> {
    (0..side)
        .map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / side as f64))
        .collect()
}

// 1D DFT of every row (`along_rows`) or every column, per channel, in place.
fn transform_axis(data: &mut [Complex64], side: usize, channels: usize, tw: &[Complex64], along_rows: bool) {
    let mut line = vec![Complex64::default(); side];
    for fixed in 0..side {
        for ch in 0..channels {
            let idx = |m: usize| {
                if along_rows {
                    (fixed * side + m) * channels + ch
                } else {
                    (m * side + fixed) * channels + ch
                }
            };
            for (k, out) in line.iter_mut().enumerate() {
                let mut acc = Complex64::default();
                for m in 0..side {
                    acc += data[idx(m)] * tw[(k * m) % side];
                }
                *out = acc;
            }
            for (k, v) in line.iter().enumerate() {
                data[idx(k)] = *v;
            }
        }
    }
}

/// Unnormalized forward 2D DFT, one transform per channel.
pub fn dft2(grid: &Grid2D) -> Spectrum {
    let (side, channels) = (grid.side, grid.channels);
    let mut data: Vec<Complex64> = grid.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let tw = twiddles(side, -1.0);
    transform_axis(&mut data, side, channels, &tw, true);
    transform_axis(&mut data, side, channels, &tw, false);
    Spectrum { side, channels, bins: data }
}

/// Inverse of [`dft2`]; returns the real part.
pub fn idft2(spec: &Spectrum) -> Grid2D {
    let (side, channels) = (spec.side, spec.channels);
    let mut data = spec.bins.clone();
    let tw = twiddles(side, 1.0);
    transform_axis(&mut data, side, channels, &tw, true);
    transform_axis(&mut data, side, channels, &tw, false);
    let norm = (side * side) as f64;
    Grid2D { side, channels, values: data.iter().map(|c| c.re / norm).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;

    fn random_grid(rng: &mut SeededRng, side: usize, channels: usize) -> Grid2D {
        Grid2D::new(side, channels, rng.normal_vec(side * side * channels, 1.0)).unwrap()
    }

    #[test]
    fn constant_grid_is_dc_only() {
        let side = 6;
        let grid = Grid2D::new(side, 2, vec![1.5; side * side * 2]).unwrap();
        let spec = dft2(&grid);
        for u in 0..side {
            for v in 0..side {
                for ch in 0..2 {
                    let f = spec.get(u, v, ch);
                    if (u, v) == (0, 0) {
                        assert!((f.re - 1.5 * 36.0).abs() < 1e-9 && f.im.abs() < 1e-9);
                    } else {
                        assert!(f.norm() < 1e-9, "bin ({u},{v}) = {f}");
                    }
                }
            }
        }
    }

    #[test]
    fn checkerboard_is_nyquist_only() {
        let side = 8;
        let vals = (0..side * side).map(|i| if (i / side + i % side) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let spec = dft2(&Grid2D::new(side, 1, vals).unwrap());
        for u in 0..side {
            for v in 0..side {
                let f = spec.get(u, v, 0);
                if (u, v) == (side / 2, side / 2) {
                    assert!((f.re - 64.0).abs() < 1e-9);
                } else {
                    assert!(f.norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn inverse_recovers_input() {
        let mut rng = SeededRng::new(21, 0);
        for side in 1..=16 {
            let grid = random_grid(&mut rng, side, 2);
            let back = idft2(&dft2(&grid));
            let scale = grid.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in grid.values().iter().zip(back.values()) {
                assert!((a - b).abs() <= 1e-9 * scale, "side {side}");
            }
        }
    }

    #[test]
    fn parseval_holds() {
        let mut rng = SeededRng::new(22, 0);
        for trial in 0..100 {
            let side = 1 + trial % 16;
            let grid = random_grid(&mut rng, side, 3);
            let spatial = grid.energy();
            let spectral = dft2(&grid).energy() / (side * side) as f64;
            assert!((spatial - spectral).abs() <= 1e-9 * spatial, "trial {trial}");
        }
    }

    #[test]
    fn radial_index_wraps() {
        assert_eq!(radial_index(0, 0, 14), 0);
        assert_eq!(radial_index(13, 0, 14), 1);
        assert_eq!(radial_index(7, 2, 14), 7);
        assert_eq!(radial_index(8, 12, 14), 6);
    }
}
