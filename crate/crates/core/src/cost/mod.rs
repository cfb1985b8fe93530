//! MAC accounting, the Pareto score and schedule search.

mod mac;
mod proxy;
mod search;

pub use mac::{mac_count, pareto_score, CostReport, LayerCost};
pub use proxy::CkaProxyEvaluator;
pub use search::{
    compare_schedules, grid_search, pareto_front, Candidate, ScheduleEvaluator, SearchOptions, SearchResult, SearchSpace,
};
