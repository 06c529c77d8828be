//! Cost, error and revenue metric aggregation.

use serde::Serialize;
use thiserror::Error;

use crate::market::{Dataset, NetworkCase, RegressionProfile};

use super::regimes::SampleClearing;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("regime and oracle clearings cover different samples")]
    SampleMismatch,
    #[error("oracle revenue must be positive, got {0}")]
    NonpositiveOracleRevenue(f64),
}

/// Pooled RMSE over farms and samples, MWh.
pub fn forecast_rmse(profile: &RegressionProfile, case: &NetworkCase, dataset: &Dataset) -> f64 {
    let mut sq = 0.0;
    let mut count = 0usize;
    for sample in &dataset.samples {
        let fc = profile.forecast_mw(case, &sample.features);
        for (f, w) in fc.iter().zip(&sample.wind_mw) {
            sq += (f - w) * (f - w);
            count += 1;
        }
    }
    (sq / count as f64).sqrt()
}

/// Mean of the largest ⌈q·n⌉ values (upper-tail conditional value at risk
/// with q = 0.1 in the reports).
pub fn cvar_upper_tail(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty() && q > 0.0 && q <= 1.0);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = ((q * values.len() as f64).ceil() as usize).max(1);
    sorted[..k].iter().sum::<f64>() / k as f64
}

/// 100·revenue/oracle_revenue, %.
pub fn competitive_ratio(revenue: f64, oracle_revenue: f64) -> Result<f64, EvalError> {
    if oracle_revenue <= 0.0 {
        return Err(EvalError::NonpositiveOracleRevenue(oracle_revenue));
    }
    Ok(100.0 * revenue / oracle_revenue)
}

/// Average dispatch costs and cost-error statistics of one regime against
/// the oracle, $.
#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub cost_total: f64,
    pub cost_da: f64,
    /// Incremental real-time cost (zero when nothing deviates).
    pub cost_rt: f64,
    /// Mean |regime, − oracle| per-sample total cost.
    pub cost_err_avg: f64,
    /// Mean signed error, for diagnosing bias.
    pub cost_err_signed: f64,
    /// Mean of the worst 10% signed errors.
    pub cost_err_cvar10: f64,
}

pub fn dispatch_cost_report(
    regime: &[SampleClearing],
    oracle: &[SampleClearing],
) -> Result<CostReport, EvalError> {
    if regime.len() != oracle.len()
        || regime
            .iter()
            .zip(oracle)
            .any(|(a, b)| a.sample_id != b.sample_id)
    {
        return Err(EvalError::SampleMismatch);
    }
    let n = regime.len() as f64;
    let cost_da = regime.iter().map(|c| c.cost_da).sum::<f64>() / n;
    let cost_rt = regime.iter().map(|c| c.cost_rt).sum::<f64>() / n;
    let errors: Vec<f64> = regime
        .iter()
        .zip(oracle)
        .map(|(r, o)| r.total_cost() - o.total_cost())
        .collect();
    Ok(CostReport {
        cost_total: cost_da + cost_rt,
        cost_da,
        cost_rt,
        cost_err_avg: errors.iter().map(|e| e.abs()).sum::<f64>() / n,
        cost_err_signed: errors.iter().sum::<f64>() / n,
        cost_err_cvar10: cvar_upper_tail(&errors, 0.1),
    })
}

/// One regime × split row of the final report.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeMetrics {
    pub regime: String,
    pub split: String,
    pub rmse_mwh: Option<f64>,
    pub cost: CostReport,
    pub farm_revenue: Vec<f64>,
    /// Competitive ratios vs the oracle regime, %.
    pub farm_cr: Option<Vec<f64>>,
    /// Unilateral deviation incentives, $ (when computed).
    pub farm_deviation: Option<Vec<f64>>,
    pub gen_revenue: f64,
    pub gen_cr: Option<f64>,
    pub demand_charge: f64,
}

/// Full evaluation output across regimes and splits.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MetricsReport {
    pub rows: Vec<RegimeMetrics>,
}

impl MetricsReport {
    pub fn find(&self, regime: &str, split: &str) -> Option<&RegimeMetrics> {
        self.rows
            .iter()
            .find(|r| r.regime == regime && r.split == split)
    }
}
