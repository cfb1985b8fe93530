use crate::error::{shape_err, Result};
use crate::io::ftkr::{find, FtkrError, Tensor};
use crate::numeric::{Mat, SeededRng};

use super::ModelConfig;

/// Parameters of one transformer block. Projections act on row vectors:
/// `q = x * wq + bq`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub wo: Mat,
    pub bq: Vec<f64>,
    pub bk: Vec<f64>,
    pub bv: Vec<f64>,
    pub bo: Vec<f64>,
    pub ln1_gamma: Vec<f64>,
    pub ln1_beta: Vec<f64>,
    pub ln2_gamma: Vec<f64>,
    pub ln2_beta: Vec<f64>,
    pub fc1: Mat,
    pub fc1_bias: Vec<f64>,
    pub fc2: Mat,
    pub fc2_bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub patch_embed: Mat,
    pub patch_bias: Vec<f64>,
    pub pos_embed: Mat,
    pub cls_token: Option<Vec<f64>>,
    pub layers: Vec<LayerWeights>,
}

const POS_EMBED_STD: f64 = 0.02;

/// Gaussian initialization with standard deviation `1/sqrt(fan_in)` for every
/// projection (`1/sqrt(d)` for the attention matrices), zero biases, unit
/// layer-norm gains and a small positional embedding.
pub fn init_weights(config: &ModelConfig, rng: &SeededRng) -> Weights {
    let d = config.dim;
    let hidden = config.hidden_dim();
    let std_d = 1.0 / (d as f64).sqrt();
    let mut embed_rng = rng.substream(0);
    let patch_embed = embed_rng.normal_mat(config.patch_dim(), d, 1.0 / (config.patch_dim() as f64).sqrt());
    let pos_embed = embed_rng.normal_mat(config.tokens(), d, POS_EMBED_STD);
    let cls_token = config.has_cls.then(|| embed_rng.normal_vec(d, std_d));
    let layers = (0..config.depth)
        .map(|l| {
            let mut r = rng.substream(1 + l as u64);
            LayerWeights {
                wq: r.normal_mat(d, d, std_d),
                wk: r.normal_mat(d, d, std_d),
                wv: r.normal_mat(d, d, std_d),
                wo: r.normal_mat(d, d, std_d),
                bq: vec![0.0; d],
                bk: vec![0.0; d],
                bv: vec![0.0; d],
                bo: vec![0.0; d],
                ln1_gamma: vec![1.0; d],
                ln1_beta: vec![0.0; d],
                ln2_gamma: vec![1.0; d],
                ln2_beta: vec![0.0; d],
                fc1: r.normal_mat(d, hidden, std_d),
                fc1_bias: vec![0.0; hidden],
                fc2: r.normal_mat(hidden, d, 1.0 / (hidden as f64).sqrt()),
                fc2_bias: vec![0.0; d],
            }
        })
        .collect();
    Weights { patch_embed, patch_bias: vec![0.0; d], pos_embed, cls_token, layers }
}

impl Weights {
    /// Replaces every value and output projection with the identity.
    pub fn with_identity_values(mut self) -> Self {
        for l in &mut self.layers {
            let d = l.wv.rows();
            l.wv = Mat::identity(d);
            l.wo = Mat::identity(d);
            l.bv.iter_mut().for_each(|b| *b = 0.0);
            l.bo.iter_mut().for_each(|b| *b = 0.0);
        }
        self
    }

    /// Shape check against a config.
    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        let d = config.dim;
        let h = config.hidden_dim();
        let expect = |what: &str, m: &Mat, r: usize, c: usize| {
            if m.shape() == (r, c) {
                Ok(())
            } else {
                Err(shape_err!("{what} is {}x{}, expected {r}x{c}", m.rows(), m.cols()))
            }
        };
        let expect_len = |what: &str, v: &[f64], n: usize| {
            if v.len() == n {
                Ok(())
            } else {
                Err(shape_err!("{what} has length {}, expected {n}", v.len()))
            }
        };
        expect("patch_embed", &self.patch_embed, config.patch_dim(), d)?;
        expect_len("patch_bias", &self.patch_bias, d)?;
        expect("pos_embed", &self.pos_embed, config.tokens(), d)?;
        match (&self.cls_token, config.has_cls) {
            (Some(c), true) => expect_len("cls_token", c, d)?,
            (None, false) => {}
            _ => return Err(shape_err!("cls token presence disagrees with config")),
        }
        if self.layers.len() != config.depth {
            return Err(shape_err!("{} layers, expected {}", self.layers.len(), config.depth));
        }
        for l in &self.layers {
            for (name, m) in [("wq", &l.wq), ("wk", &l.wk), ("wv", &l.wv), ("wo", &l.wo)] {
                expect(name, m, d, d)?;
            }
            expect("fc1", &l.fc1, d, h)?;
            expect("fc2", &l.fc2, h, d)?;
            for (name, v) in [
                ("bq", &l.bq),
                ("bk", &l.bk),
                ("bv", &l.bv),
                ("bo", &l.bo),
                ("ln1.gamma", &l.ln1_gamma),
                ("ln1.beta", &l.ln1_beta),
                ("ln2.gamma", &l.ln2_gamma),
                ("ln2.beta", &l.ln2_beta),
                ("fc2_bias", &l.fc2_bias),
            ] {
                expect_len(name, v, d)?;
            }
            expect_len("fc1_bias", &l.fc1_bias, h)?;
        }
        Ok(())
    }

    /// Flattens into named tensors; layer indices in names are 1-based.
    pub fn to_tensors(&self) -> Vec<Tensor> {
        let mut out = vec![
            Tensor::from_mat("patch_embed.weight", &self.patch_embed),
            Tensor::from_vec("patch_embed.bias", &self.patch_bias),
            Tensor::from_mat("pos_embed", &self.pos_embed),
        ];
        if let Some(c) = &self.cls_token {
            out.push(Tensor::from_vec("cls_token", c));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let p = |s: &str| format!("layer{}.{s}", i + 1);
            out.extend([
                Tensor::from_mat(p("wq"), &l.wq),
                Tensor::from_mat(p("wk"), &l.wk),
                Tensor::from_mat(p("wv"), &l.wv),
                Tensor::from_mat(p("wo"), &l.wo),
                Tensor::from_vec(p("bq"), &l.bq),
                Tensor::from_vec(p("bk"), &l.bk),
                Tensor::from_vec(p("bv"), &l.bv),
                Tensor::from_vec(p("bo"), &l.bo),
                Tensor::from_vec(p("ln1.gamma"), &l.ln1_gamma),
                Tensor::from_vec(p("ln1.beta"), &l.ln1_beta),
                Tensor::from_vec(p("ln2.gamma"), &l.ln2_gamma),
                Tensor::from_vec(p("ln2.beta"), &l.ln2_beta),
                Tensor::from_mat(p("fc1"), &l.fc1),
                Tensor::from_vec(p("fc1.bias"), &l.fc1_bias),
                Tensor::from_mat(p("fc2"), &l.fc2),
                Tensor::from_vec(p("fc2.bias"), &l.fc2_bias),
            ]);
        }
        out
    }

    /// Inverse of [`Weights::to_tensors`], checked against `config`.
    pub fn from_tensors(tensors: &[Tensor], config: &ModelConfig) -> Result<Self> {
        let mat = |name: &str| -> std::result::Result<Mat, FtkrError> { find(tensors, name)?.to_mat() };
        let vec = |name: &str| -> std::result::Result<Vec<f64>, FtkrError> { Ok(find(tensors, name)?.data.clone()) };
        let mut layers = Vec::with_capacity(config.depth);
        for i in 1..=config.depth {
            let p = |s: &str| format!("layer{i}.{s}");
            layers.push(LayerWeights {
                wq: mat(&p("wq"))?,
                wk: mat(&p("wk"))?,
                wv: mat(&p("wv"))?,
                wo: mat(&p("wo"))?,
                bq: vec(&p("bq"))?,
                bk: vec(&p("bk"))?,
                bv: vec(&p("bv"))?,
                bo: vec(&p("bo"))?,
                ln1_gamma: vec(&p("ln1.gamma"))?,
                ln1_beta: vec(&p("ln1.beta"))?,
                ln2_gamma: vec(&p("ln2.gamma"))?,
                ln2_beta: vec(&p("ln2.beta"))?,
                fc1: mat(&p("fc1"))?,
                fc1_bias: vec(&p("fc1.bias"))?,
                fc2: mat(&p("fc2"))?,
                fc2_bias: vec(&p("fc2.bias"))?,
            });
        }
        let weights = Weights {
            patch_embed: mat("patch_embed.weight")?,
            patch_bias: vec("patch_embed.bias")?,
            pos_embed: mat("pos_embed")?,
            cls_token: if config.has_cls { Some(vec("cls_token")?) } else { None },
            layers,
        };
        weights.validate(config)?;
        Ok(weights)
    }
}
