use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Grid2D, SeededRng};

/// One sinusoidal grating: `amplitude * cos(2π(u·row + v·col)/side + phase)`,
/// frequencies in cycles per image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grating {
    pub u: i64,
    pub v: i64,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Fixed phase in radians; `None` draws a uniform phase per image.
    #[serde(default)]
    pub phase: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticRecipe {
    #[serde(default)]
    pub gratings: Vec<Grating>,
    #[serde(default)]
    pub noise_sigma: f64,
}

impl Default for SyntheticRecipe {
    /// A coarse and a medium grating plus mild noise.
    fn default() -> Self {
        Self {
            gratings: vec![
                Grating { u: 1, v: 2, amplitude: 1.0, phase: None },
                Grating { u: 3, v: -1, amplitude: 0.5, phase: None },
            ],
            noise_sigma: 0.3,
        }
    }
}

impl SyntheticRecipe {
    pub fn validate(&self, side: usize) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma {} must be finite and >= 0", self.noise_sigma)));
        }
        let nyquist = (side / 2) as i64;
        for g in &self.gratings {
            if g.u.abs() > nyquist || g.v.abs() > nyquist {
                return Err(Error::Config(format!(
                    "grating ({}, {}) beyond the Nyquist limit {nyquist} of a {side}-pixel image",
                    g.u, g.v
                )));
            }
            if !g.amplitude.is_finite() || g.phase.is_some_and(|p| !p.is_finite()) {
                return Err(Error::Config("grating amplitude and phase must be finite".into()));
            }
        }
        Ok(())
    }
}

/// `count` images of `side x side x channels`. Image `i` draws from stream
/// `i`, so batches are prefix-stable. Channels share the gratings and get
/// independent noise.
pub fn gen_synthetic(recipe: &SyntheticRecipe, side: usize, channels: usize, count: usize, seed: u64) -> Result<Vec<Grid2D>> {
    recipe.validate(side)?;
    if side == 0 || channels == 0 {
        return Err(Error::Config("image side and channels must be positive".into()));
    }
    (0..count)
        .map(|i| {
            let mut rng = SeededRng::new(seed, i as u64);
            let phases: Vec<f64> =
                recipe.gratings.iter().map(|g| g.phase.unwrap_or_else(|| rng.uniform_range(0.0, 2.0 * PI))).collect();
            let mut grid = Grid2D::zeros(side, channels);
            for r in 0..side {
                for c in 0..side {
                    let base: f64 = recipe
                        .gratings
                        .iter()
                        .zip(&phases)
                        .map(|(g, p)| {
                            let t = 2.0 * PI * (g.u as f64 * r as f64 + g.v as f64 * c as f64) / side as f64;
                            g.amplitude * (t + p).cos()
                        })
                        .sum();
                    for v in grid.cell_mut(r, c) {
                        *v = base;
                    }
                }
            }
            if recipe.noise_sigma > 0.0 {
                for r in 0..side {
                    for c in 0..side {
                        for v in grid.cell_mut(r, c) {
                            *v += recipe.noise_sigma * rng.normal();
                        }
                    }
                }
            }
            Ok(grid)
        })
        .collect()
}
