use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Switches for the sub-layers of a block. All on is a standard pre-norm ViT
/// block; turning residual, FFN and layer norm off leaves a pure attention
/// stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockToggles {
    #[serde(default = "yes")]
    pub residual: bool,
    #[serde(default = "yes")]
    pub ffn: bool,
    #[serde(default = "yes")]
    pub layer_norm: bool,
}

fn yes() -> bool {
    true
}

impl Default for BlockToggles {
    fn default() -> Self {
        Self { residual: true, ffn: true, layer_norm: true }
    }
}

impl BlockToggles {
    pub fn pure_attention() -> Self {
        Self { residual: false, ffn: false, layer_norm: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub depth: usize,
    pub dim: usize,
    pub heads: usize,
    #[serde(default = "default_mlp_ratio")]
    pub mlp_ratio: f64,
    #[serde(default = "default_grid_side")]
    pub grid_side: usize,
    #[serde(default = "default_patch_size")]
    pub patch_size: usize,
    #[serde(default = "default_in_channels")]
    pub in_channels: usize,
    #[serde(default = "yes")]
    pub has_cls: bool,
    #[serde(default = "default_eps")]
    pub layernorm_eps: f64,
    #[serde(default = "default_classes")]
    pub num_classes: usize,
    #[serde(default)]
    pub toggles: BlockToggles,
}

fn default_mlp_ratio() -> f64 {
    4.0
}
fn default_grid_side() -> usize {
    14
}
fn default_patch_size() -> usize {
    16
}
fn default_in_channels() -> usize {
    3
}
fn default_eps() -> f64 {
    1e-6
}
fn default_classes() -> usize {
    1000
}

impl ModelConfig {
    pub fn new(depth: usize, dim: usize, heads: usize) -> Self {
        Self {
            depth,
            dim,
            heads,
            mlp_ratio: default_mlp_ratio(),
            grid_side: default_grid_side(),
            patch_size: default_patch_size(),
            in_channels: default_in_channels(),
            has_cls: true,
            layernorm_eps: default_eps(),
            num_classes: default_classes(),
            toggles: BlockToggles::default(),
        }
    }

    pub fn deit_tiny() -> Self {
        Self::new(12, 192, 3)
    }

    pub fn deit_small() -> Self {
        Self::new(12, 384, 6)
    }

    pub fn deit_base() -> Self {
        Self::new(12, 768, 12)
    }

    /// Looks up `deit-t`, `deit-s` or `deit-b`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "deit-t" | "deit-tiny" => Some(Self::deit_tiny()),
            "deit-s" | "deit-small" => Some(Self::deit_small()),
            "deit-b" | "deit-base" => Some(Self::deit_base()),
            _ => None,
        }
    }

    pub fn with_grid(mut self, grid_side: usize, patch_size: usize, in_channels: usize) -> Self {
        self.grid_side = grid_side;
        self.patch_size = patch_size;
        self.in_channels = in_channels;
        self
    }

    pub fn with_toggles(mut self, toggles: BlockToggles) -> Self {
        self.toggles = toggles;
        self
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn hidden_dim(&self) -> usize {
        (self.mlp_ratio * self.dim as f64).round() as usize
    }

    pub fn image_tokens(&self) -> usize {
        self.grid_side * self.grid_side
    }

    /// Token count entering the first block.
    pub fn tokens(&self) -> usize {
        self.image_tokens() + self.has_cls as usize
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * self.in_channels
    }

    pub fn image_side(&self) -> usize {
        self.grid_side * self.patch_size
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.depth == 0 || self.dim == 0 || self.heads == 0 {
            return bad("depth, dim and heads must be positive".into());
        }
        if !self.dim.is_multiple_of(self.heads) {
            return bad(format!("dim {} not divisible by {} heads", self.dim, self.heads));
        }
        if self.grid_side == 0 || self.patch_size == 0 || self.in_channels == 0 {
            return bad("grid side, patch size and channels must be positive".into());
        }
        if !(self.mlp_ratio > 0.0) || self.hidden_dim() == 0 {
            return bad(format!("mlp ratio {} gives an empty hidden layer", self.mlp_ratio));
        }
        if !(self.layernorm_eps > 0.0) {
            return bad("layernorm eps must be positive".into());
        }
        Ok(())
    }
}
