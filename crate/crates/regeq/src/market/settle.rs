//! Revenue settlement of one cleared sample.

use serde::Serialize;

use super::{DispatchDecision, NetworkCase, Sample};

/// Per-sample settlement, $: per-farm profits plus fleet aggregates.
#[derive(Debug, Clone, Serialize)]
pub struct Settlement {
    /// Per farm: λ₁ŵ + λ₂(w − ŵ) − γ(ŵ − w)².
    pub wind_profit: Vec<f64>,
    /// Per farm: price terms only (no regression-loss deduction).
    pub wind_price_revenue: Vec<f64>,
    /// Aggregate generator profit: λ₁ᵀp + λ₂ᵀ(r+ − r−) − generation cost.
    pub gen_profit: f64,
    pub gen_price_revenue: f64,
    /// Aggregate load objective: λ₂ᵀℓ − shedding cost.
    pub load_profit: f64,
    /// λ₂ᵀℓ paid to shed load.
    pub shed_payment: f64,
    /// What demand pays net of shedding compensation: λ₁ᵀd − λ₂ᵀℓ.
    pub demand_charge: f64,
}

/// Settles one sample: wind farms on their forecast and imbalance,
/// generators on schedule and regulation, loads on shed energy.
///
/// `forecast_mw` is the per-farm submitted forecast; `gamma` the per-farm
/// regression-loss weights.
pub fn settle(
    lmp_da: &[f64],
    lmp_rt: &[f64],
    forecast_mw: &[f64],
    decision: &DispatchDecision,
    sample: &Sample,
    case: &NetworkCase,
    gamma: &[f64],
) -> Settlement {
    assert_eq!(lmp_da.len(), case.n_bus, "lmp_da must be bus-indexed");
    assert_eq!(lmp_rt.len(), case.n_bus, "lmp_rt must be bus-indexed");
    assert_eq!(forecast_mw.len(), case.n_farm());
    assert_eq!(sample.wind_mw.len(), case.n_farm());

    let mut wind_profit = Vec::with_capacity(case.n_farm());
    let mut wind_price_revenue = Vec::with_capacity(case.n_farm());
    for j in 0..case.n_farm() {
        let bus = case.wind_bus[j];
        let fc = forecast_mw[j];
        let w = sample.wind_mw[j];
        let price_rev = lmp_da[bus] * fc + lmp_rt[bus] * (w - fc);
        wind_price_revenue.push(price_rev);
        wind_profit.push(price_rev - gamma[j] * (fc - w) * (fc - w));
    }

    let mut gen_price_revenue = 0.0;
    let mut gen_cost = 0.0;
    let mut shed_payment = 0.0;
    let mut shed_cost = 0.0;
    let mut demand_payment = 0.0;
    for b in 0..case.n_bus {
        let u = decision.p[b] + decision.r_up[b] - decision.r_dn[b];
        gen_price_revenue +=
            lmp_da[b] * decision.p[b] + lmp_rt[b] * (decision.r_up[b] - decision.r_dn[b]);
        gen_cost += case.gen_cost_quad[b] * u * u
            + case.gen_cost_lin[b] * decision.p[b]
            + case.reg_up_cost[b] * decision.r_up[b]
            - case.reg_dn_cost[b] * decision.r_dn[b];
        shed_payment += lmp_rt[b] * decision.shed[b];
        shed_cost += case.shed_cost_quad[b] * decision.shed[b] * decision.shed[b]
            + case.shed_cost_lin[b] * decision.shed[b];
        demand_payment += lmp_da[b] * case.demand[b];
    }

    Settlement {
        wind_profit,
        wind_price_revenue,
        gen_profit: gen_price_revenue - gen_cost,
        gen_price_revenue,
        load_profit: shed_payment - shed_cost,
        shed_payment,
        demand_charge: demand_payment - shed_payment,
    }
}
