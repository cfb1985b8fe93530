use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One reduction directive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionStep {
    /// 1-based layer index.
    pub layer: usize,
    /// Fraction of candidate tokens removed; `0` keeps everything.
    pub rho: f64,
    /// Window side count; `w^2` local DC groups.
    pub window: usize,
}

impl ReductionStep {
    pub fn new(layer: usize, rho: f64, window: usize) -> Self {
        Self { layer, rho, window }
    }

    /// HF tokens kept out of `candidates`: `floor(candidates * (1 - rho))`.
    pub fn keep_count(&self, candidates: usize) -> usize {
        (candidates as f64 * (1.0 - self.rho)).floor() as usize
    }
}

/// Per-layer reduction directives plus the per-head reweighting parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSchedule {
    #[serde(default)]
    pub steps: Vec<ReductionStep>,
    /// Per-head HF emphasis; empty means all zeros.
    #[serde(default)]
    pub omega1: Vec<f64>,
    /// Per-head DC-column adjustment; empty means all zeros.
    #[serde(default)]
    pub omega2: Vec<f64>,
}

impl ReductionSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(steps: Vec<ReductionStep>) -> Self {
        Self { steps, ..Self::default() }
    }

    /// Layers 4, 7 and 10 at 30% with windows 2, 1, 1.
    pub fn three_stage() -> Self {
        Self::new(vec![
            ReductionStep::new(4, 0.3, 2),
            ReductionStep::new(7, 0.3, 1),
            ReductionStep::new(10, 0.3, 1),
        ])
    }

    pub fn with_omega(mut self, omega1: Vec<f64>, omega2: Vec<f64>) -> Self {
        self.omega1 = omega1;
        self.omega2 = omega2;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step_at(&self, layer: usize) -> Option<&ReductionStep> {
        self.steps.iter().find(|s| s.layer == layer)
    }

    pub fn first_layer(&self) -> Option<usize> {
        self.steps.first().map(|s| s.layer)
    }

    /// `(omega1, omega2)` expanded to `heads` entries.
    pub fn omegas(&self, heads: usize) -> (Vec<f64>, Vec<f64>) {
        let expand = |w: &[f64]| if w.is_empty() { vec![0.0; heads] } else { w.to_vec() };
        (expand(&self.omega1), expand(&self.omega2))
    }

    /// Checks layer order, ratios, window monotonicity and divisibility.
    pub fn validate(&self, depth: usize, grid_side: usize, heads: usize) -> Result<()> {
        let mut prev_layer = 0;
        let mut prev_window = usize::MAX;
        for s in &self.steps {
            if s.layer == 0 || s.layer > depth {
                return Err(Error::Schedule(format!("layer {} outside 1..={depth}", s.layer)));
            }
            if s.layer <= prev_layer {
                return Err(Error::Schedule("layers must be strictly increasing".into()));
            }
            if !(0.0..1.0).contains(&s.rho) {
                return Err(Error::Schedule(format!("rho {} outside [0, 1)", s.rho)));
            }
            if s.window == 0 {
                return Err(Error::Schedule("window must be >= 1".into()));
            }
            if s.window > prev_window {
                return Err(Error::Schedule(format!(
                    "window grows from {prev_window} to {} at layer {}",
                    s.window, s.layer
                )));
            }
            if !grid_side.is_multiple_of(s.window) {
                return Err(Error::Schedule(format!(
                    "grid side {grid_side} not divisible by window {}",
                    s.window
                )));
            }
            prev_layer = s.layer;
            prev_window = s.window;
        }
        for (name, w) in [("omega1", &self.omega1), ("omega2", &self.omega2)] {
            if !w.is_empty() && w.len() != heads {
                return Err(Error::Schedule(format!("{name} has {} entries for {heads} heads", w.len())));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schedule(format!("{name} is not finite")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keep_count_floors() {
        assert_eq!(ReductionStep::new(4, 0.3, 2).keep_count(196), 137);
        assert_eq!(ReductionStep::new(4, 0.0, 1).keep_count(196), 196);
    }

    #[test]
    fn three_stage_is_valid() {
        ReductionSchedule::three_stage().validate(12, 14, 6).unwrap();
    }

    #[test]
    fn rejects_bad_schedules() {
        let bad = [
            ReductionSchedule::new(vec![ReductionStep::new(13, 0.3, 1)]),
            ReductionSchedule::new(vec![ReductionStep::new(4, 0.3, 1), ReductionStep::new(4, 0.3, 1)]),
            ReductionSchedule::new(vec![ReductionStep::new(4, 1.0, 1)]),
            ReductionSchedule::new(vec![ReductionStep::new(4, 0.3, 1), ReductionStep::new(7, 0.3, 2)]),
            ReductionSchedule::new(vec![ReductionStep::new(4, 0.3, 4)]),
            ReductionSchedule::three_stage().with_omega(vec![0.1], vec![]),
        ];
        for s in bad {
            assert!(matches!(s.validate(12, 14, 6), Err(Error::Schedule(_))), "{s:?}");
        }
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let ok: ReductionSchedule =
            serde_json::from_str(r#"{"steps":[{"layer":4,"rho":0.3,"window":2}]}"#).unwrap();
        assert_eq!(ok.steps.len(), 1);
        assert!(ok.omega1.is_empty());
        let bad = serde_json::from_str::<ReductionSchedule>(r#"{"steps":[],"tau":0.3}"#);
        assert!(bad.is_err());
    }
}
