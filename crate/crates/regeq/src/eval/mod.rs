//! Benchmark harness: clears the two-settlement market per sample under a
//! chosen forecast regime and aggregates cost, error, revenue and risk
//! metrics for oracle/accuracy/coordinated comparisons.

mod metrics;
mod regimes;

pub use metrics::{
    competitive_ratio, cvar_upper_tail, dispatch_cost_report, forecast_rmse, CostReport,
    EvalError, MetricsReport, RegimeMetrics,
};
pub use regimes::{
    deviation_incentive, oracle_run, run_regime, settle_clearings, Regime, SampleClearing,
};
