//! File formats, configuration and synthetic inputs.

pub mod config;
pub mod ftkr;
pub mod synth;

pub use config::{AnalysisConfig, ExperimentConfig, SearchConfig};
pub use ftkr::{decode, encode, read_ftkr, write_ftkr, Dtype, FtkrError, Tensor};
pub use synth::{gen_synthetic, Grating, SyntheticRecipe};
