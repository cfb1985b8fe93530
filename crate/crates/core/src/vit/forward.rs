use serde::Serialize;

use crate::error::{shape_err, Error, Result};
use crate::numeric::{Grid2D, Mat};
use crate::reduction::{ReducerKind, Reducer, ReductionSchedule, TokenLayout};

use super::attention::{self_attention_reweighted, Reweighting};
use super::{LayerWeights, ModelConfig, Weights};

/// What enters the first block.
#[derive(Clone, Copy, Debug)]
pub enum ForwardInput<'a> {
    /// Raw image, patch-embedded with positional embedding and CLS.
    Image(&'a Grid2D),
    /// Pre-embedded tokens used as-is.
    Tokens(&'a Mat, &'a TokenLayout),
}

/// Intermediates of one block.
#[derive(Clone, Debug, Serialize)]
pub struct LayerRecord {
    /// 1-based block index.
    pub layer: usize,
    /// Tokens entering the block.
    pub input: Mat,
    pub input_layout: TokenLayout,
    /// Post-softmax attention per head, before any reweighting.
    pub attention: Vec<Mat>,
    /// Tokens leaving the block, after reduction and FFN.
    pub output: Mat,
    pub layout: TokenLayout,
    pub reduced: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LayerTrace {
    pub layers: Vec<LayerRecord>,
}

impl LayerTrace {
    pub fn token_counts(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.output.rows()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub tokens: Mat,
    pub layout: TokenLayout,
    /// Empty unless tracing was requested.
    pub trace: LayerTrace,
}

/// Inference-only pre-norm ViT.
#[derive(Clone, Debug)]
pub struct Vit {
    config: ModelConfig,
    weights: Weights,
}

fn layer_norm(x: &Mat, gamma: &[f64], beta: &[f64], eps: f64) -> Mat {
    let d = x.cols() as f64;
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let mean = row.iter().sum::<f64>() / d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let inv = 1.0 / (var + eps).sqrt();
        for ((v, g), b) in row.iter_mut().zip(gamma).zip(beta) {
            *v = (*v - mean) * inv * g + b;
        }
    }
    out
}

// tanh approximation of GELU
fn gelu(v: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * v * (1.0 + (C * (v + 0.044715 * v * v * v)).tanh())
}

impl Vit {
    pub fn new(config: ModelConfig, weights: Weights) -> Result<Self> {
        config.validate()?;
        weights.validate(&config)?;
        Ok(Self { config, weights })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Patch embedding plus CLS and positional embedding.
    pub fn embed(&self, image: &Grid2D) -> Result<(Mat, TokenLayout)> {
        let c = &self.config;
        if image.side() != c.image_side() || image.channels() != c.in_channels {
            return Err(shape_err!(
                "image {}x{}x{} does not match model input {}x{}x{}",
                image.side(),
                image.side(),
                image.channels(),
                c.image_side(),
                c.image_side(),
                c.in_channels
            ));
        }
        let p = c.patch_size;
        let g = c.grid_side;
        let patches = Mat::from_fn(g * g, c.patch_dim(), |t, k| {
            let (pr, pc) = (t / g, t % g);
            let ch = k % c.in_channels;
            let pix = k / c.in_channels;
            image.get(pr * p + pix / p, pc * p + pix % p, ch)
        });
        let mut emb = patches.matmul(&self.weights.patch_embed)?;
        emb.add_row_vector(&self.weights.patch_bias)?;
        let mut x = match &self.weights.cls_token {
            Some(cls) => Mat::vstack(&[&Mat::from_vec(1, c.dim, cls.clone())?, &emb])?,
            None => emb,
        };
        x.add_assign(&self.weights.pos_embed)?;
        Ok((x, TokenLayout::grid(g, c.has_cls)))
    }

    fn ffn(&self, x: &Mat, w: &LayerWeights) -> Result<Mat> {
        let t = &self.config.toggles;
        let h = if t.layer_norm { layer_norm(x, &w.ln2_gamma, &w.ln2_beta, self.config.layernorm_eps) } else { x.clone() };
        let mut hidden = h.matmul(&w.fc1)?;
        hidden.add_row_vector(&w.fc1_bias)?;
        let hidden = hidden.map(gelu);
        let mut out = hidden.matmul(&w.fc2)?;
        out.add_row_vector(&w.fc2_bias)?;
        Ok(out)
    }

    /// Runs all blocks. Scheduled layers reduce tokens after the attention
    /// residual and before the FFN, using that block's attention. Once DC
    /// tokens exist, attention outputs use the reweighted map.
    pub fn forward_with(
        &self,
        input: ForwardInput<'_>,
        schedule: &ReductionSchedule,
        reducer: &dyn Reducer,
        trace: bool,
    ) -> Result<ForwardOutput> {
        self.forward_from(1, input, schedule, reducer, trace)
    }

    /// Like [`Vit::forward_with`] but starts at block `start` (1-based);
    /// earlier blocks and their schedule steps are skipped.
    pub fn forward_from(
        &self,
        start: usize,
        input: ForwardInput<'_>,
        schedule: &ReductionSchedule,
        reducer: &dyn Reducer,
        trace: bool,
    ) -> Result<ForwardOutput> {
        let c = &self.config;
        if start == 0 || start > c.depth {
            return Err(Error::InvalidArgument(format!("start block {start} outside 1..={}", c.depth)));
        }
        schedule.validate(c.depth, c.grid_side, c.heads)?;
        let (mut x, mut layout) = match input {
            ForwardInput::Image(img) => self.embed(img)?,
            ForwardInput::Tokens(x, layout) => {
                if x.cols() != c.dim || x.rows() != layout.len() {
                    return Err(shape_err!("{}x{} tokens for dim {} and {} roles", x.rows(), x.cols(), c.dim, layout.len()));
                }
                if layout.grid_side() != c.grid_side {
                    return Err(Error::Layout(format!("layout grid {} vs model grid {}", layout.grid_side(), c.grid_side)));
                }
                (x.clone(), layout.clone())
            }
        };
        let (omega1, omega2) = schedule.omegas(c.heads);
        let t = c.toggles;
        let mut records = Vec::new();
        for (idx, w) in self.weights.layers.iter().enumerate().skip(start - 1) {
            let layer = idx + 1;
            let input_x = trace.then(|| x.clone());
            let input_layout = trace.then(|| layout.clone());
            let h = if t.layer_norm { layer_norm(&x, &w.ln1_gamma, &w.ln1_beta, c.layernorm_eps) } else { x.clone() };
            let dc_cols = layout.dc_indices();
            let reweight = (!dc_cols.is_empty())
                .then_some(Reweighting { dc_cols: &dc_cols, omega1: &omega1, omega2: &omega2 });
            let (att, maps) = self_attention_reweighted(&h, w, c.heads, reweight)?;
            x = if t.residual { x.add(&att)? } else { att };
            let step = schedule.step_at(layer);
            if let Some(step) = step {
                let (nx, nl) = reducer.reduce(&x, &maps, &layout, step)?;
                x = nx;
                layout = nl;
            }
            if t.ffn {
                let f = self.ffn(&x, w)?;
                x = if t.residual { x.add(&f)? } else { f };
            }
            if !x.is_finite() {
                return Err(Error::NonFinite("block output"));
            }
            if trace {
                records.push(LayerRecord {
                    layer,
                    input: input_x.expect("traced"),
                    input_layout: input_layout.expect("traced"),
                    attention: maps,
                    output: x.clone(),
                    layout: layout.clone(),
                    reduced: step.is_some(),
                });
            }
        }
        Ok(ForwardOutput { tokens: x, layout, trace: LayerTrace { layers: records } })
    }

    /// Traced forward with the given reducer.
    pub fn forward(&self, input: ForwardInput<'_>, schedule: &ReductionSchedule, reducer: &dyn Reducer) -> Result<ForwardOutput> {
        self.forward_with(input, schedule, reducer, true)
    }

    /// Untraced forward with frequency-aware reduction.
    pub fn run(&self, input: ForwardInput<'_>, schedule: &ReductionSchedule) -> Result<ForwardOutput> {
        self.forward_with(input, schedule, &ReducerKind::FrequencyAware, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq::hf_norm;
    use crate::numeric::SeededRng;
    use crate::reduction::ReductionStep;
    use crate::vit::{init_weights, BlockToggles};

    fn model(depth: usize, grid: usize, seed: u64) -> Vit {
        let c = ModelConfig::new(depth, 16, 2).with_grid(grid, 2, 3);
        let w = init_weights(&c, &SeededRng::new(seed, 0));
        Vit::new(c, w).unwrap()
    }

    fn image(m: &Vit, seed: u64) -> Grid2D {
        let c = m.config();
        let side = c.image_side();
        let v = SeededRng::new(seed, 1).normal_vec(side * side * c.in_channels, 1.0);
        Grid2D::new(side, c.in_channels, v).unwrap()
    }

    #[test]
    fn empty_schedule_keeps_count_and_is_deterministic() {
        let m = model(4, 4, 1);
        let img = image(&m, 2);
        let a = m.forward(ForwardInput::Image(&img), &ReductionSchedule::empty(), &ReducerKind::FrequencyAware).unwrap();
        let b = m.forward(ForwardInput::Image(&img), &ReductionSchedule::empty(), &ReducerKind::FrequencyAware).unwrap();
        assert_eq!(a.trace.token_counts(), vec![17; 4]);
        assert_eq!(a.tokens, b.tokens);
        for rec in &a.trace.layers {
            for att in &rec.attention {
                assert!(att.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-10));
            }
        }
    }

    #[test]
    fn deit_grid_schedule_counts() {
        let c = ModelConfig::new(12, 8, 2).with_grid(14, 1, 1);
        let m = Vit::new(c.clone(), init_weights(&c, &SeededRng::new(3, 0))).unwrap();
        let img = image(&m, 4);
        let out = m.forward(ForwardInput::Image(&img), &ReductionSchedule::three_stage(), &ReducerKind::FrequencyAware).unwrap();
        let counts = out.trace.token_counts();
        assert_eq!(counts[2], 197);
        assert_eq!(counts[3], 142);
        assert_eq!(counts[6], 97);
        assert_eq!(counts[9], 68);
        assert!(counts.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(out.layout.cls_index(), Some(0));
        assert_eq!(out.layout.represented_mass(), 196);
    }

    #[test]
    fn zero_omega_matches_plain_schedule() {
        let m = model(4, 4, 5);
        let img = image(&m, 6);
        let steps = vec![ReductionStep::new(2, 0.5, 2)];
        let plain = m.run(ForwardInput::Image(&img), &ReductionSchedule::new(steps.clone())).unwrap();
        let zero = ReductionSchedule::new(steps).with_omega(vec![0.0; 2], vec![0.0; 2]);
        let z = m.run(ForwardInput::Image(&img), &zero).unwrap();
        assert!(plain.tokens.sub(&z.tokens).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_schedule() {
        let m = model(3, 4, 7);
        let img = image(&m, 8);
        let s = ReductionSchedule::new(vec![ReductionStep::new(4, 0.3, 1)]);
        assert!(matches!(m.run(ForwardInput::Image(&img), &s), Err(Error::Schedule(_))));
        let s = ReductionSchedule::new(vec![ReductionStep::new(1, 0.3, 3)]);
        assert!(matches!(m.run(ForwardInput::Image(&img), &s), Err(Error::Schedule(_))));
    }

    #[test]
    fn pure_attention_stack_contracts() {
        let c = ModelConfig::new(6, 8, 2).with_grid(4, 1, 1).with_toggles(BlockToggles::pure_attention());
        let w = init_weights(&c, &SeededRng::new(9, 0)).with_identity_values();
        let m = Vit::new(c, w).unwrap();
        let x = SeededRng::new(10, 0).normal_mat(17, 8, 1.0);
        let layout = TokenLayout::grid(4, true);
        let out = m.forward(ForwardInput::Tokens(&x, &layout), &ReductionSchedule::empty(), &ReducerKind::FrequencyAware).unwrap();
        let mut prev = hf_norm(&x);
        for rec in &out.trace.layers {
            let now = hf_norm(&rec.output);
            assert!(now <= prev + 1e-12, "{now} > {prev}");
            prev = now;
        }
    }
}
