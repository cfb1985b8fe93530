//! Minimal inference-only vision transformer.

mod attention;
mod config;
mod forward;
mod weights;

pub use attention::{self_attention, self_attention_reweighted, Reweighting};
pub use config::{BlockToggles, ModelConfig};
pub use forward::{ForwardInput, ForwardOutput, LayerRecord, LayerTrace, Vit};
pub use weights::{init_weights, LayerWeights, Weights};
