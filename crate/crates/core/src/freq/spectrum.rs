//! Spatial spectra of token features laid back out on the patch grid.
//!
//! Tokens are painted onto their grid cells (region tokens onto every cell
//! they cover); cells with no surviving token take the current image-token
//! mean so that layers with different token counts stay comparable. Bands are
//! indexed by the Chebyshev radius `max(|u|, |v|)`; the high-frequency band is
//! every bin with radius above `side / 4`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dft2, radial_index, Grid2D, Mat};
use crate::reduction::TokenLayout;

const LOG_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpectrum {
    /// Mean `|F|` per radial band, averaged over channels.
    pub band_amplitude: Vec<f64>,
    /// Share of total spectral energy per radial band; sums to 1.
    pub band_energy_fraction: Vec<f64>,
    pub hf_band_energy_fraction: f64,
    /// HF-band energy per channel, scaled by `1/side^2` (spatial units).
    pub hf_band_energy: f64,
    /// `ln(mean HF amplitude) - ln(DC amplitude)`.
    pub delta_log_amplitude: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub layers: Vec<LayerSpectrum>,
}

#[inline]
pub fn is_hf_bin(u: usize, v: usize, side: usize) -> bool {
    4 * radial_index(u, v, side) > side
}

/// Cell-weighted mean of all image and region tokens.
pub fn image_token_mean(x: &Mat, layout: &TokenLayout) -> Result<Vec<f64>> {
    let mut mean = vec![0.0; x.cols()];
    let mut cells = 0usize;
    for i in layout.candidate_indices() {
        let k = layout.footprint(i).len();
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += k as f64 * v;
        }
        cells += k;
    }
    if cells == 0 {
        return Err(Error::InvalidArgument("no image tokens remain".into()));
    }
    mean.iter_mut().for_each(|m| *m /= cells as f64);
    Ok(mean)
}

/// Paints `tokens` onto the grid; every other cell gets `fill`.
pub fn paint_tokens(x: &Mat, layout: &TokenLayout, tokens: &[usize], fill: &[f64]) -> Result<Grid2D> {
    if x.rows() != layout.len() {
        return Err(Error::Layout(format!("{} tokens vs layout of {}", x.rows(), layout.len())));
    }
    let side = layout.grid_side();
    let mut values = Vec::with_capacity(side * side * x.cols());
    for _ in 0..side * side {
        values.extend_from_slice(fill);
    }
    let mut grid = Grid2D::new(side, x.cols(), values)?;
    for &i in tokens {
        for (r, c) in layout.footprint(i) {
            grid.cell_mut(r, c).copy_from_slice(x.row(i));
        }
    }
    Ok(grid)
}

/// Spectrum of a painted grid.
pub fn grid_spectrum(grid: &Grid2D) -> LayerSpectrum {
    let side = grid.side();
    let channels = grid.channels();
    let spec = dft2(grid);
    let bands = side / 2 + 1;
    let mut amp_sum = vec![0.0; bands];
    let mut amp_count = vec![0usize; bands];
    let mut energy = vec![0.0; bands];
    let mut hf_amp = 0.0;
    let mut hf_bins = 0usize;
    for u in 0..side {
        for v in 0..side {
            let band = radial_index(u, v, side);
            let hf = is_hf_bin(u, v, side);
            for ch in 0..channels {
                let f = spec.get(u, v, ch);
                amp_sum[band] += f.norm();
                energy[band] += f.norm_sqr();
                if hf {
                    hf_amp += f.norm();
                }
            }
            amp_count[band] += channels;
            if hf {
                hf_bins += channels;
            }
        }
    }
    let total: f64 = energy.iter().sum();
    let band_energy_fraction: Vec<f64> = if total > 0.0 {
        energy.iter().map(|e| e / total).collect()
    } else {
        let mut f = vec![0.0; bands];
        f[0] = 1.0;
        f
    };
    let hf_energy: f64 = (0..bands).filter(|&b| 4 * b > side).map(|b| energy[b]).sum();
    let hf_band_energy_fraction = (0..bands).filter(|&b| 4 * b > side).map(|b| band_energy_fraction[b]).sum();
    let band_amplitude = amp_sum.iter().zip(&amp_count).map(|(s, &c)| s / c.max(1) as f64).collect();
    let dc_amp = (0..channels).map(|ch| spec.get(0, 0, ch).norm()).sum::<f64>() / channels as f64;
    let hf_mean_amp = if hf_bins > 0 { hf_amp / hf_bins as f64 } else { 0.0 };
    LayerSpectrum {
        band_amplitude,
        band_energy_fraction,
        hf_band_energy_fraction,
        hf_band_energy: hf_energy / (channels * side * side) as f64,
        delta_log_amplitude: (hf_mean_amp + LOG_EPS).ln() - (dc_amp + LOG_EPS).ln(),
    }
}

/// Spectrum of all image tokens, missing cells mean-filled. CLS and DC
/// tokens are left out.
pub fn token_spectrum(x: &Mat, layout: &TokenLayout) -> Result<LayerSpectrum> {
    let fill = image_token_mean(x, layout)?;
    let grid = paint_tokens(x, layout, &layout.candidate_indices(), &fill)?;
    Ok(grid_spectrum(&grid))
}

/// Spectrum of the token subset `tokens` against the mean of all image
/// tokens: only the subset's deviations from the DC signal carry energy.
pub fn token_set_spectrum(x: &Mat, layout: &TokenLayout, tokens: &[usize]) -> Result<LayerSpectrum> {
    let fill = image_token_mean(x, layout)?;
    let grid = paint_tokens(x, layout, tokens, &fill)?;
    Ok(grid_spectrum(&grid))
}
