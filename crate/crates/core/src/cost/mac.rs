use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduction::ReductionSchedule;
use crate::vit::ModelConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    /// 1-based block index.
    pub layer: usize,
    pub tokens_msa: usize,
    pub tokens_ffn: usize,
    pub msa_macs: f64,
    pub ffn_macs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub layers: Vec<LayerCost>,
    pub patch_embed_macs: f64,
    pub head_macs: f64,
    pub total_macs: f64,
}

impl CostReport {
    pub fn total_gmacs(&self) -> f64 {
        self.total_macs / 1e9
    }
}

/// Multiply-accumulate count of one forward pass.
///
/// A block that sees `n` tokens at attention and `n'` at the FFN costs
/// `4nd² + 2n²d + 2n'd·hidden`. A reduction step keeps
/// `floor(n_img (1 - rho))` image tokens and adds one DC token per window;
/// CLS and DC tokens are counted like image tokens. A window left without LF
/// tokens gets no DC token at run time, so for large windows this is an upper
/// bound.
pub fn mac_count(config: &ModelConfig, schedule: &ReductionSchedule) -> Result<CostReport> {
    config.validate()?;
    schedule.validate(config.depth, config.grid_side, config.heads)?;
    let d = config.dim as f64;
    let hidden = config.hidden_dim() as f64;
    let cls = config.has_cls as usize;
    let mut image = config.image_tokens();
    let mut dc = 0usize;
    let mut layers = Vec::with_capacity(config.depth);
    for layer in 1..=config.depth {
        let tokens_msa = cls + image + dc;
        if let Some(step) = schedule.step_at(layer) {
            let kept = step.keep_count(image);
            if kept == 0 {
                return Err(Error::Schedule(format!("rho {} removes every token at layer {layer}", step.rho)));
            }
            if kept < image || dc > 0 {
                dc = step.window * step.window;
            }
            image = kept;
        }
        let tokens_ffn = cls + image + dc;
        let n = tokens_msa as f64;
        layers.push(LayerCost {
            layer,
            tokens_msa,
            tokens_ffn,
            msa_macs: 4.0 * n * d * d + 2.0 * n * n * d,
            ffn_macs: 2.0 * tokens_ffn as f64 * d * hidden,
        });
    }
    let patch_embed_macs = (config.image_tokens() * config.dim * config.patch_dim()) as f64;
    let head_macs = (config.dim * config.num_classes) as f64;
    let total_macs =
        layers.iter().map(|l| l.msa_macs + l.ffn_macs).sum::<f64>() + patch_embed_macs + head_macs;
    Ok(CostReport { layers, patch_embed_macs, head_macs, total_macs })
}

/// `(1 - mac / mac_base) * (acc / acc_base)`.
pub fn pareto_score(mac: f64, mac_base: f64, acc: f64, acc_base: f64) -> Result<f64> {
    if !(mac_base > 0.0 && acc_base > 0.0) {
        return Err(Error::InvalidArgument(format!("bases must be positive, got {mac_base} and {acc_base}")));
    }
    Ok((1.0 - mac / mac_base) * (acc / acc_base))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::ReductionStep;

    fn gmacs(c: &ModelConfig, s: &ReductionSchedule) -> f64 {
        mac_count(c, s).unwrap().total_gmacs()
    }

    #[test]
    fn baseline_hand_count_small() {
        // depth 1, d 4, 2x2 grid with CLS, patch 1, 1 channel, 10 classes
        let mut c = ModelConfig::new(1, 4, 1).with_grid(2, 1, 1);
        c.num_classes = 10;
        let r = mac_count(&c, &ReductionSchedule::empty()).unwrap();
        let n = 5.0;
        let expected = 4.0 * n * 16.0 + 2.0 * n * n * 4.0 + 2.0 * n * 4.0 * 16.0 + 4.0 * 4.0 + 40.0;
        assert_eq!(r.total_macs, expected);
    }

    #[test]
    fn deit_token_counts() {
        let r = mac_count(&ModelConfig::deit_small(), &ReductionSchedule::three_stage()).unwrap();
        let ffn: Vec<usize> = r.layers.iter().map(|l| l.tokens_ffn).collect();
        assert_eq!(&ffn[..4], &[197, 197, 197, 142]);
        assert_eq!(ffn[6], 97);
        assert_eq!(ffn[9], 68);
        assert_eq!(r.layers[3].tokens_msa, 197);
        assert_eq!(r.layers[4].tokens_msa, 142);
    }

    #[test]
    fn deit_anchors() {
        let s = ReductionSchedule::three_stage();
        let e = ReductionSchedule::empty();
        for (c, base, reduced) in [
            (ModelConfig::deit_tiny(), 1.3, 0.8),
            (ModelConfig::deit_small(), 4.6, 3.0),
            (ModelConfig::deit_base(), 17.6, 11.6),
        ] {
            assert!((gmacs(&c, &e) / base - 1.0).abs() < 0.05);
            assert!((gmacs(&c, &s) / reduced - 1.0).abs() < 0.10);
        }
    }

    #[test]
    fn zero_rho_without_dc_keeps_count() {
        let s = ReductionSchedule::new(vec![ReductionStep::new(3, 0.0, 2)]);
        let c = ModelConfig::deit_tiny();
        assert_eq!(gmacs(&c, &s), gmacs(&c, &ReductionSchedule::empty()));
    }

    #[test]
    fn score_examples() {
        assert_eq!(pareto_score(4.6, 4.6, 79.8, 79.8).unwrap(), 0.0);
        assert!((pareto_score(3.0, 4.6, 79.9, 79.8).unwrap() - 0.348_26).abs() < 1e-5);
        assert_eq!(pareto_score(3.0, 4.6, 0.0, 79.8).unwrap(), 0.0);
        assert!(pareto_score(1.0, 0.0, 1.0, 1.0).is_err());
    }
}
