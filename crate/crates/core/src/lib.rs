//! Frequency-aware token reduction for vision transformers.

pub mod cost;
pub mod error;
pub mod freq;
pub mod io;
pub mod numeric;
pub mod reduction;
pub mod verify;
pub mod vit;

pub use error::{Error, Result};
