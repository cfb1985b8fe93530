//! Frequency-domain views of token features: the mean-centering filter,
//! attention decomposition, grid spectra, similarity and collapse metrics.

pub mod analysis;
pub mod cka;
pub mod collapse;
pub mod filters;
pub mod spectrum;

pub use analysis::{awgn_sensitivity, hf_lf_stats, spectrum_report, AwgnSensitivity, HfLfStats};
pub use cka::linear_cka;
pub use collapse::{cka_or_degenerate, collapse_report, grid_features, CollapseReport};
pub use filters::{awgn_probe, dc_similarity, decompose_attention, hf_norm, high_pass_center};
pub use spectrum::{
    grid_spectrum, image_token_mean, is_hf_bin, paint_tokens, token_set_spectrum, token_spectrum, LayerSpectrum,
    SpectrumReport,
};
