use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::freq::{cka_or_degenerate, grid_features};
use crate::numeric::{Grid2D, Mat};
use crate::reduction::ReductionSchedule;
use crate::vit::{ForwardInput, Vit};

use super::search::ScheduleEvaluator;

/// Quality proxy: mean linear CKA between the final grid features of the
/// reduced and the unreduced model over a fixed image batch.
pub struct CkaProxyEvaluator {
    model: Vit,
    images: Vec<Grid2D>,
    reference: Vec<Mat>,
}

impl CkaProxyEvaluator {
    pub fn new(model: Vit, images: Vec<Grid2D>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::InvalidArgument("proxy batch is empty".into()));
        }
        let empty = ReductionSchedule::empty();
        let reference = images
            .par_iter()
            .map(|img| {
                let out = model.run(ForwardInput::Image(img), &empty)?;
                grid_features(&out.tokens, &out.layout)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { model, images, reference })
    }

    pub fn model(&self) -> &Vit {
        &self.model
    }
}

impl ScheduleEvaluator for CkaProxyEvaluator {
    fn evaluate(&self, schedule: &ReductionSchedule) -> Result<f64> {
        let mut total = 0.0;
        for (img, reference) in self.images.iter().zip(&self.reference) {
            let out = self.model.run(ForwardInput::Image(img), schedule)?;
            total += cka_or_degenerate(&grid_features(&out.tokens, &out.layout)?, reference)?;
        }
        Ok(total / self.images.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;
    use crate::reduction::ReductionStep;
    use crate::vit::{init_weights, ModelConfig};

    fn evaluator(seed: u64) -> CkaProxyEvaluator {
        let c = ModelConfig::new(4, 16, 2).with_grid(6, 2, 1);
        let m = Vit::new(c.clone(), init_weights(&c, &SeededRng::new(seed, 0))).unwrap();
        let side = c.image_side();
        let mut rng = SeededRng::new(seed, 1);
        let imgs = (0..2).map(|_| Grid2D::new(side, 1, rng.normal_vec(side * side, 1.0)).unwrap()).collect();
        CkaProxyEvaluator::new(m, imgs).unwrap()
    }

    #[test]
    fn empty_schedule_scores_one() {
        let e = evaluator(1);
        assert!((e.evaluate(&ReductionSchedule::empty()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heavy_reduction_scores_lower_and_is_deterministic() {
        let e = evaluator(2);
        let s = ReductionSchedule::new(vec![ReductionStep::new(2, 0.9, 1)]);
        let a = e.evaluate(&s).unwrap();
        assert!(a < e.evaluate(&ReductionSchedule::empty()).unwrap());
        assert_eq!(a, e.evaluate(&s).unwrap());
    }

    #[test]
    fn empty_batch_rejected() {
        let c = ModelConfig::new(1, 4, 1).with_grid(2, 1, 1);
        let m = Vit::new(c.clone(), init_weights(&c, &SeededRng::new(0, 0))).unwrap();
        assert!(CkaProxyEvaluator::new(m, vec![]).is_err());
    }
}
