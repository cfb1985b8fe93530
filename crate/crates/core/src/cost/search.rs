use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::SeededRng;
use crate::reduction::{ReductionSchedule, ReductionStep};
use crate::vit::ModelConfig;

use super::mac::{mac_count, pareto_score};

/// One reduction layer per group, each with a ratio and a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub groups: Vec<Vec<usize>>,
    pub ratios: Vec<f64>,
    pub windows: Vec<usize>,
}

impl Default for SearchSpace {
    /// Groups {2,3,4}, {5,6,7}, {8,9,10}; ratios 0.1 to 0.9; windows 1, 2, 4.
    fn default() -> Self {
        Self {
            groups: vec![vec![2, 3, 4], vec![5, 6, 7], vec![8, 9, 10]],
            ratios: (1..=9).map(|k| k as f64 / 10.0).collect(),
            windows: vec![1, 2, 4],
        }
    }
}

impl SearchSpace {
    /// Raw candidate count, valid or not.
    pub fn size(&self) -> usize {
        let per = self.ratios.len() * self.windows.len();
        self.groups.iter().map(|g| g.len() * per).product()
    }

    /// Candidate `index` in mixed-radix order: first group slowest, and within
    /// a group layer, then ratio, then window.
    pub fn schedule(&self, mut index: usize) -> ReductionSchedule {
        let (nr, nw) = (self.ratios.len(), self.windows.len());
        let mut steps = Vec::with_capacity(self.groups.len());
        for g in self.groups.iter().rev() {
            let radix = g.len() * nr * nw;
            let mut k = index % radix;
            index /= radix;
            let w = self.windows[k % nw];
            k /= nw;
            let rho = self.ratios[k % nr];
            let layer = g[k / nr];
            steps.push(ReductionStep::new(layer, rho, w));
        }
        steps.reverse();
        ReductionSchedule::new(steps)
    }

    fn validate(&self) -> Result<()> {
        if self.groups.is_empty() || self.groups.iter().any(Vec::is_empty) || self.ratios.is_empty() || self.windows.is_empty() {
            return Err(Error::InvalidArgument("search space is empty".into()));
        }
        Ok(())
    }
}

/// Scores a schedule with a quality proxy in `[0, 1]`; must be deterministic.
pub trait ScheduleEvaluator: Sync {
    fn evaluate(&self, schedule: &ReductionSchedule) -> Result<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub schedule: ReductionSchedule,
    pub mac_total: f64,
    pub proxy_acc: f64,
    pub score: f64,
    pub on_front: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Sorted by score, best first; ties by schedule.
    pub candidates: Vec<Candidate>,
    pub mac_base: f64,
    pub acc_base: f64,
    /// Raw size of the space.
    pub space_size: usize,
    /// Candidates rejected by schedule validation (growing windows,
    /// windows that do not divide the grid, ...).
    pub invalid: usize,
}

impl SearchResult {
    pub fn front(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter().filter(|c| c.on_front)
    }
}

#[derive(Clone, Debug, Default)]
pub struct SearchOptions {
    /// Evaluate at most this many valid candidates, drawn uniformly.
    pub budget: Option<usize>,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

/// Lexicographic order on (layer, rho, window) per step.
pub fn compare_schedules(a: &ReductionSchedule, b: &ReductionSchedule) -> Ordering {
    for (x, y) in a.steps.iter().zip(&b.steps) {
        let o = x.layer.cmp(&y.layer).then(x.rho.total_cmp(&y.rho)).then(x.window.cmp(&y.window));
        if o != Ordering::Equal {
            return o;
        }
    }
    a.steps.len().cmp(&b.steps.len())
}

/// Marks points not dominated in (lower mac, higher accuracy).
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i].0.total_cmp(&points[j].0).then(points[j].1.total_cmp(&points[i].1)));
    let mut on = vec![false; points.len()];
    let mut best_before = f64::NEG_INFINITY;
    let mut k = 0;
    while k < order.len() {
        let mac = points[order[k]].0;
        let mut end = k;
        while end < order.len() && points[order[end]].0 == mac {
            end += 1;
        }
        let group_best = points[order[k]].1;
        for &i in &order[k..end] {
            let acc = points[i].1;
            on[i] = acc > best_before && acc == group_best;
        }
        best_before = best_before.max(group_best);
        k = end;
    }
    on
}

/// Evaluates the space (or a uniform sample of `budget` valid candidates).
/// Output order and content do not depend on the worker count.
pub fn grid_search(
    space: &SearchSpace,
    config: &ModelConfig,
    evaluator: &dyn ScheduleEvaluator,
    options: &SearchOptions,
) -> Result<SearchResult> {
    space.validate()?;
    let run = || -> Result<SearchResult> {
        let size = space.size();
        let valid: Vec<ReductionSchedule> = (0..size)
            .into_par_iter()
            .map(|i| space.schedule(i))
            .filter(|s| s.validate(config.depth, config.grid_side, config.heads).is_ok())
            .collect();
        let invalid = size - valid.len();
        let chosen: Vec<ReductionSchedule> = match options.budget {
            Some(b) if b < valid.len() => {
                let mut rng = SeededRng::new(options.seed, 0);
                rng.sample_indices(valid.len(), b).into_iter().map(|i| valid[i].clone()).collect()
            }
            _ => valid,
        };
        if chosen.is_empty() {
            return Err(Error::InvalidArgument("no valid candidate in the search space".into()));
        }
        let empty = ReductionSchedule::empty();
        let mac_base = mac_count(config, &empty)?.total_macs;
        let acc_base = evaluator.evaluate(&empty)?;
        let mut candidates = chosen
            .into_par_iter()
            .map(|schedule| {
                let mac_total = mac_count(config, &schedule)?.total_macs;
                let proxy_acc = evaluator.evaluate(&schedule)?;
                let score = pareto_score(mac_total, mac_base, proxy_acc, acc_base)?;
                Ok(Candidate { schedule, mac_total, proxy_acc, score, on_front: false })
            })
            .collect::<Result<Vec<_>>>()?;
        let points: Vec<(f64, f64)> = candidates.iter().map(|c| (c.mac_total, c.proxy_acc)).collect();
        for (c, on) in candidates.iter_mut().zip(pareto_front(&points)) {
            c.on_front = on;
        }
        candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| compare_schedules(&a.schedule, &b.schedule)));
        Ok(SearchResult { candidates, mac_base, acc_base, space_size: size, invalid })
    };
    match options.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    }
}
