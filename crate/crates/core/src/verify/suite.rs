use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Mat, SeededRng};
use crate::reduction::baseline_merge;

use super::checks::*;

/// Aggregate of one check over all trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub trials: usize,
    /// Trials with `margin < -tolerance`.
    pub violations: usize,
    /// Smallest margin seen.
    pub worst_margin: f64,
    pub tolerance: f64,
    /// Reported-only checks never fail the suite.
    pub asserted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub trials: usize,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    /// True when no asserted check has a violation.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| !c.asserted || c.violations == 0)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const EXACT_TOLERANCE: f64 = 1e-12;
pub const FLASH_TOLERANCE: f64 = 1e-10;

type TrialFn = fn(&mut SeededRng) -> Result<f64>;

struct CheckDef {
    name: &'static str,
    tolerance: f64,
    asserted: bool,
    trial: TrialFn,
}

/// Attention map `softmax(QK^T / sqrt(d_k))` for standard Gaussian queries
/// and keys.
pub fn random_attention(rng: &mut SeededRng, n: usize, dk: usize) -> Mat {
    let q = rng.normal_mat(n, dk, 1.0);
    let k = rng.normal_mat(n, dk, 1.0);
    q.matmul_transposed(&k).expect("same width").scale(1.0 / (dk as f64).sqrt()).row_softmax()
}

fn subset_trial(rng: &mut SeededRng) -> Result<f64> {
    let n = rng.int_inclusive(2, 12);
    let d = rng.int_inclusive(1, 8);
    let x = rng.normal_mat(n, d, 1.0);
    let k = rng.int_inclusive(1, n);
    check_subset_variance(&x, &rng.sample_indices(n, k))
}

fn convex_trial(rng: &mut SeededRng) -> Result<f64> {
    let n = rng.int_inclusive(2, 12);
    let d = rng.int_inclusive(1, 8);
    let n_out = rng.int_inclusive(1, n - 1);
    let x = rng.normal_mat(n, d, 1.0);
    let m = rng.softmax_mat(n_out, n, 1.0);
    check_convex_combination(&x, &m)
}

fn contraction_trial(rng: &mut SeededRng) -> Result<f64> {
    let n = rng.int_inclusive(2, 12);
    let d = rng.int_inclusive(1, 8);
    let dk = rng.int_inclusive(1, 8);
    let a = random_attention(rng, n, dk);
    let x = rng.normal_mat(n, d, 1.0);
    check_row_stochastic_contraction(&a, &x)
}

fn jensen_trial(rng: &mut SeededRng) -> Result<f64> {
    let dk = rng.int_inclusive(1, 16);
    let m = rng.int_inclusive(1, 32);
    let q = rng.normal_vec(dk, 1.0);
    let keys = rng.normal_mat(m, dk, 1.0);
    check_jensen_dc(&q, &keys, 1.0 / (dk as f64).sqrt())
}

fn jensen_normalized_trial(rng: &mut SeededRng) -> Result<f64> {
    let dk = rng.int_inclusive(1, 16);
    let m = rng.int_inclusive(1, 32);
    let others = rng.int_inclusive(0, 16);
    let q = rng.normal_vec(dk, 1.0);
    let lf = rng.normal_mat(m, dk, 1.0);
    let other = rng.normal_mat(others, dk, 1.0);
    check_jensen_dc_normalized(&q, &other, &lf, 1.0 / (dk as f64).sqrt())
}

fn flash_trial(rng: &mut SeededRng) -> Result<f64> {
    let n = rng.int_inclusive(4, 32);
    let h = rng.int_inclusive(1, 8);
    let dv = rng.int_inclusive(1, 8);
    let dc = rng.int_inclusive(0, 5.min(n));
    let dc_cols = rng.sample_indices(n, dc);
    let attn: Vec<Mat> = (0..h).map(|_| random_attention(rng, n, dv)).collect();
    let values: Vec<Mat> = (0..h).map(|_| rng.normal_mat(n, dv, 1.0)).collect();
    let w1 = rng.normal_vec(h, 1.0);
    let w2 = rng.normal_vec(h, 1.0);
    Ok(-check_flash_identity(&attn, &values, &dc_cols, &w1, &w2)?)
}

fn low_pass_trial(rng: &mut SeededRng) -> Result<f64> {
    let n = rng.int_inclusive(2, 12);
    let d = rng.int_inclusive(1, 8);
    let a = random_attention(rng, n, d);
    let x = rng.normal_mat(n, d, 1.0);
    Ok(-check_low_pass(&a, &x)?)
}

fn reduced_hf_trial(rng: &mut SeededRng, regime: ReductionRegime) -> Result<f64> {
    let n = rng.int_inclusive(3, 12);
    let d = rng.int_inclusive(2, 8);
    let n_out = rng.int_inclusive(1, n - 1);
    let s = 1.0 / (d as f64).sqrt();
    let w = HeadWeights { wq: rng.normal_mat(d, d, s), wk: rng.normal_mat(d, d, s), wv: Mat::identity(d) };
    let x = rng.normal_mat(n, d, 1.0);
    let m = if rng.uniform() < 0.5 {
        let keep = rng.sample_indices(n, n_out);
        Mat::from_fn(n_out, n, |r, c| (c == keep[r]) as u8 as f64)
    } else {
        baseline_merge(&x, n_out)?
    };
    Ok(check_reduced_hf_norm(&x, &m, &w, regime)?.margin)
}

fn definitions() -> Vec<CheckDef> {
    vec![
        CheckDef { name: "subset_sum", tolerance: EXACT_TOLERANCE, asserted: true, trial: subset_trial },
        CheckDef { name: "convex_combination", tolerance: EXACT_TOLERANCE, asserted: true, trial: convex_trial },
        CheckDef { name: "row_stochastic_contraction", tolerance: EXACT_TOLERANCE, asserted: true, trial: contraction_trial },
        CheckDef { name: "jensen_dc", tolerance: EXACT_TOLERANCE, asserted: true, trial: jensen_trial },
        CheckDef { name: "jensen_dc_normalized", tolerance: EXACT_TOLERANCE, asserted: false, trial: jensen_normalized_trial },
        CheckDef { name: "flash_identity", tolerance: FLASH_TOLERANCE, asserted: true, trial: flash_trial },
        CheckDef { name: "low_pass", tolerance: EXACT_TOLERANCE, asserted: true, trial: low_pass_trial },
        CheckDef {
            name: "reduced_hf_shared_attention",
            tolerance: EXACT_TOLERANCE,
            asserted: true,
            trial: |r| reduced_hf_trial(r, ReductionRegime::SharedAttention),
        },
        CheckDef {
            name: "reduced_hf_recomputed",
            tolerance: EXACT_TOLERANCE,
            asserted: false,
            trial: |r| reduced_hf_trial(r, ReductionRegime::Recomputed),
        },
    ]
}

/// Names of all checks in report order.
pub fn check_names() -> Vec<&'static str> {
    definitions().iter().map(|s| s.name).collect()
}

/// Runs every check for `trials` seeded trials. Trial `t` of check `c` draws
/// from stream `(c << 32) | t`, so results do not depend on scheduling.
pub fn run_suite(seed: u64, trials: usize) -> Result<VerificationReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial required".into()));
    }
    let checks = definitions()
        .into_iter()
        .enumerate()
        .map(|(c, def)| {
            let margins = (0..trials)
                .into_par_iter()
                .map(|t| (def.trial)(&mut SeededRng::new(seed, ((c as u64) << 32) | t as u64)))
                .collect::<Result<Vec<f64>>>()?;
            Ok(CheckResult {
                name: def.name.to_string(),
                trials,
                violations: margins.iter().filter(|&&m| m < -def.tolerance).count(),
                worst_margin: margins.iter().cloned().fold(f64::INFINITY, f64::min),
                tolerance: def.tolerance,
                asserted: def.asserted,
            })
        })
        .collect::<Result<_>>()?;
    Ok(VerificationReport { seed, trials, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_single_trial() {
        let a = run_suite(7, 1).unwrap();
        let b = run_suite(7, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.checks.len(), check_names().len());
    }

    #[test]
    fn json_round_trip() {
        let r = run_suite(3, 5).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        let back: VerificationReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(run_suite(1, 0).is_err());
    }

    #[test]
    fn default_suite_passes() {
        let r = run_suite(7, 1000).unwrap();
        for c in &r.checks {
            if c.asserted {
                assert_eq!(c.violations, 0, "{c:?}");
            }
        }
        assert!(r.passed());
    }
}
