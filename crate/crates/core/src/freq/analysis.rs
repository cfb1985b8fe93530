//! Layerwise comparisons of the HF and LF token sets picked from a traced
//! forward pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Mat, SeededRng};
use crate::reduction::{select_hf_lf, token_importance, ReducerKind, ReductionSchedule, SelectionMode};
use crate::vit::{ForwardInput, LayerRecord, LayerTrace, Vit};

use super::collapse::{cka_or_degenerate, grid_features};
use super::filters::{awgn_probe, dc_similarity};
use super::spectrum::{token_set_spectrum, token_spectrum, SpectrumReport};

/// HF/LF set statistics for one block input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HfLfStats {
    pub layer: usize,
    /// Tokens per set.
    pub set_size: usize,
    pub hf_energy: f64,
    pub lf_energy: f64,
    pub hf_delta_log_amplitude: f64,
    pub lf_delta_log_amplitude: f64,
    pub hf_dc_similarity: f64,
    pub lf_dc_similarity: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Splits the block input into the top and bottom `floor(n_img * tau)`
/// tokens by HF importance under the block's own attention and compares the
/// two sets.
pub fn hf_lf_stats(record: &LayerRecord, tau: f64) -> Result<HfLfStats> {
    if !(0.0..=0.5).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau {tau} outside [0, 0.5]")));
    }
    let x = &record.input;
    let layout = &record.input_layout;
    let candidates = layout.candidate_indices();
    let r = (candidates.len() as f64 * tau).floor() as usize;
    let importance = token_importance(&record.attention, &candidates)?;
    let sel = select_hf_lf(&candidates, &importance, r, SelectionMode::Analysis)?;
    let hf = token_set_spectrum(x, layout, &sel.hf)?;
    let lf = token_set_spectrum(x, layout, &sel.lf)?;
    let sims = dc_similarity(&x.select_rows(&candidates));
    let sim_of = |set: &[usize]| mean(set.iter().map(|k| sims[candidates.binary_search(k).expect("candidate")]));
    Ok(HfLfStats {
        layer: record.layer,
        set_size: r,
        hf_energy: hf.hf_band_energy,
        lf_energy: lf.hf_band_energy,
        hf_delta_log_amplitude: hf.delta_log_amplitude,
        lf_delta_log_amplitude: lf.delta_log_amplitude,
        hf_dc_similarity: sim_of(&sel.hf),
        lf_dc_similarity: sim_of(&sel.lf),
    })
}

/// Spectrum of every block output in the trace.
pub fn spectrum_report(trace: &LayerTrace) -> Result<SpectrumReport> {
    let layers = trace.layers.iter().map(|l| token_spectrum(&l.output, &l.layout)).collect::<Result<_>>()?;
    Ok(SpectrumReport { layers })
}

/// Output disruption from noising the HF versus the LF set of one block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AwgnSensitivity {
    pub layer: usize,
    pub sigma: f64,
    /// `1 - CKA(final clean, final noisy)` with noise on the HF set.
    pub hf_disruption: f64,
    pub lf_disruption: f64,
}

/// Adds `N(0, sigma^2)` noise to the HF or LF set of the input to `layer`
/// and measures how far the final grid features move. Runs without
/// reduction.
pub fn awgn_sensitivity(
    model: &Vit,
    input: ForwardInput<'_>,
    layer: usize,
    tau: f64,
    sigma: f64,
    rng: &SeededRng,
) -> Result<AwgnSensitivity> {
    let empty = ReductionSchedule::empty();
    let clean = model.forward(input, &empty, &ReducerKind::FrequencyAware)?;
    let record = clean
        .trace
        .layers
        .get(layer.wrapping_sub(1))
        .ok_or_else(|| Error::InvalidArgument(format!("layer {layer} outside the model")))?;
    let candidates = record.input_layout.candidate_indices();
    let r = (candidates.len() as f64 * tau).floor() as usize;
    let importance = token_importance(&record.attention, &candidates)?;
    let sel = select_hf_lf(&candidates, &importance, r, SelectionMode::Analysis)?;
    let reference = grid_features(&clean.tokens, &clean.layout)?;
    let disruption = |set: &[usize], stream: u64| -> Result<f64> {
        let noisy: Mat = awgn_probe(&record.input, set, sigma, &mut rng.substream(stream))?;
        let out = model.forward_from(
            layer,
            ForwardInput::Tokens(&noisy, &record.input_layout),
            &empty,
            &ReducerKind::FrequencyAware,
            false,
        )?;
        Ok(1.0 - cka_or_degenerate(&grid_features(&out.tokens, &out.layout)?, &reference)?)
    };
    Ok(AwgnSensitivity { layer, sigma, hf_disruption: disruption(&sel.hf, 0)?, lf_disruption: disruption(&sel.lf, 1)? })
}
