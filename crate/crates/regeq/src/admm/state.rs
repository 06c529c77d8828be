//! Iteration state, projected dual updates and price recomposition.

use serde::Serialize;

use crate::market::{equilibrium_lmps, Dataset, DispatchDecision, NetworkCase, RawDuals};

/// Full per-iteration state: one dual set and price pair per sample, plus
/// the previous joint iterate the next best responses anchor to.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub iteration: usize,
    pub duals: Vec<RawDuals>,
    pub lmp_da: Vec<Vec<f64>>,
    pub lmp_rt: Vec<Vec<f64>>,
    /// θ rows of the previous iterate (capacity-normalized units).
    pub theta: Vec<Vec<f64>>,
    /// Previous dispatch/shedding iterate, bus-indexed per sample.
    pub dispatch: Vec<DispatchDecision>,
}

impl AdmmState {
    pub fn cold_start(case: &NetworkCase, dataset: &Dataset) -> Self {
        let n = dataset.len();
        Self {
            iteration: 0,
            duals: vec![RawDuals::zeros(case.n_line()); n],
            lmp_da: vec![vec![0.0; case.n_bus]; n],
            lmp_rt: vec![vec![0.0; case.n_bus]; n],
            theta: vec![vec![0.0; dataset.feature_dim]; case.n_farm()],
            dispatch: vec![DispatchDecision::zeros(case.n_bus); n],
        }
    }

    /// Per-farm forecasts ŵ in MW for sample `i` under the stored θ.
    pub fn forecasts_mw(&self, case: &NetworkCase, dataset: &Dataset, i: usize) -> Vec<f64> {
        let phi = &dataset.samples[i].features;
        (0..case.n_farm())
            .map(|j| {
                case.wind_cap[j] * self.theta[j].iter().zip(phi).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }
}

/// One trace record per iteration, e.g. for convergence plots.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub rho: f64,
    pub max_lmp_change: f64,
    pub max_balance_violation: f64,
    pub max_flow_excess: f64,
    /// Average profit per farm at the current prices, $.
    pub farm_profits: Vec<f64>,
}

/// Constraint residuals of one sample at a joint iterate; positive values
/// of the balance entries mean surplus.
pub(crate) struct SampleResiduals {
    pub da_balance: f64,
    pub rt_balance: f64,
    /// Per line: f̄ − F(p + ŵ − d), both signs.
    pub da_slack_up: Vec<f64>,
    pub da_slack_dn: Vec<f64>,
    /// Per line: f̄ ∓ F(p + r⁺ − r⁻ + w + ℓ − d); forecasts cancel.
    pub rt_slack_up: Vec<f64>,
    pub rt_slack_dn: Vec<f64>,
}

pub(crate) fn sample_residuals(
    case: &NetworkCase,
    dataset: &Dataset,
    theta: &[Vec<f64>],
    dispatch: &[DispatchDecision],
    i: usize,
) -> SampleResiduals {
    let sample = &dataset.samples[i];
    let d = &dispatch[i];
    let nl = case.n_line();

    let mut forecast_bus = vec![0.0; case.n_bus];
    let mut actual_bus = vec![0.0; case.n_bus];
    for (j, &bus) in case.wind_bus.iter().enumerate() {
        let fc: f64 = theta[j]
            .iter()
            .zip(&sample.features)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * case.wind_cap[j];
        forecast_bus[bus] += fc;
        actual_bus[bus] += sample.wind_mw[j];
    }

    let da_balance: f64 = (0..case.n_bus)
        .map(|b| d.p[b] + forecast_bus[b] - case.demand[b])
        .sum();
    let rt_balance: f64 = (0..case.n_bus)
        .map(|b| d.r_up[b] - d.r_dn[b] - forecast_bus[b] + actual_bus[b] + d.shed[b])
        .sum();

    let mut da_slack_up = Vec::with_capacity(nl);
    let mut da_slack_dn = Vec::with_capacity(nl);
    let mut rt_slack_up = Vec::with_capacity(nl);
    let mut rt_slack_dn = Vec::with_capacity(nl);
    for l in 0..nl {
        let mut da_flow = 0.0;
        let mut rt_flow = 0.0;
        for b in 0..case.n_bus {
            da_flow += case.ptdf[l][b] * (d.p[b] + forecast_bus[b] - case.demand[b]);
            rt_flow += case.ptdf[l][b]
                * (d.p[b] + d.r_up[b] - d.r_dn[b] + actual_bus[b] + d.shed[b] - case.demand[b]);
        }
        da_slack_up.push(case.line_limit[l] - da_flow);
        da_slack_dn.push(case.line_limit[l] + da_flow);
        rt_slack_up.push(case.line_limit[l] - rt_flow);
        rt_slack_dn.push(case.line_limit[l] + rt_flow);
    }

    SampleResiduals {
        da_balance,
        rt_balance,
        da_slack_up,
        da_slack_dn,
        rt_slack_up,
        rt_slack_dn,
    }
}

/// Projected dual ascent on the complementarity multipliers:
/// μ ← [μ − ρ·residual]₊ for balances, κ ← [κ − ρ·slack]₊ for flows.
pub fn dual_update(
    case: &NetworkCase,
    dataset: &Dataset,
    theta: &[Vec<f64>],
    dispatch: &[DispatchDecision],
    duals: &mut [RawDuals],
    rho: f64,
) {
    for i in 0..dataset.len() {
        let res = sample_residuals(case, dataset, theta, dispatch, i);
        let d = &mut duals[i];
        d.mu1 = (d.mu1 - rho * res.da_balance).max(0.0);
        d.mu2 = (d.mu2 - rho * res.rt_balance).max(0.0);
        for l in 0..case.n_line() {
            d.kbar1[l] = (d.kbar1[l] - rho * res.da_slack_up[l]).max(0.0);
            d.kun1[l] = (d.kun1[l] - rho * res.da_slack_dn[l]).max(0.0);
            d.kbar2[l] = (d.kbar2[l] - rho * res.rt_slack_up[l]).max(0.0);
            d.kun2[l] = (d.kun2[l] - rho * res.rt_slack_dn[l]).max(0.0);
        }
    }
}

/// Recomposes the per-sample locational prices from updated duals; the
/// same linear map as the equilibrium price composition.
pub fn lmp_update(
    case: &NetworkCase,
    duals: &[RawDuals],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut da = Vec::with_capacity(duals.len());
    let mut rt = Vec::with_capacity(duals.len());
    for d in duals {
        let (a, b) = equilibrium_lmps(d, &case.ptdf, case.n_bus).expect("dual dimensions fixed by state");
        da.push(a);
        rt.push(b);
    }
    (da, rt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{synthetic_dataset, three_bus_case};
    use crate::market::Sample;
    use approx::assert_abs_diff_eq;

    fn one_bus_setup() -> (NetworkCase, Dataset) {
        let case = crate::fixtures::one_bus_case();
        let dataset = Dataset {
            feature_dim: 1,
            samples: vec![Sample {
                id: 0,
                features: vec![1.0],
                wind_mw: vec![10.0],
            }],
        };
        (case, dataset)
    }

    #[test]
    fn surplus_reduces_the_balance_dual() {
        let (case, dataset) = one_bus_setup();
        // p = 42, ŵ = 10, d = 50 → surplus 2
        let theta = vec![vec![10.0 / 60.0]];
        let mut dispatch = vec![DispatchDecision::zeros(1)];
        dispatch[0].p[0] = 42.0;
        let mut duals = vec![RawDuals {
            mu1: 5.0,
            ..RawDuals::zeros(0)
        }];
        dual_update(&case, &dataset, &theta, &dispatch, &mut duals, 1.0);
        assert_abs_diff_eq!(duals[0].mu1, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_clips_at_zero() {
        let (case, dataset) = one_bus_setup();
        // surplus 5 with μ = 1 and ρ = 1 → [−4]₊ = 0
        let theta = vec![vec![10.0 / 60.0]];
        let mut dispatch = vec![DispatchDecision::zeros(1)];
        dispatch[0].p[0] = 45.0;
        let mut duals = vec![RawDuals {
            mu1: 1.0,
            ..RawDuals::zeros(0)
        }];
        dual_update(&case, &dataset, &theta, &dispatch, &mut duals, 1.0);
        assert_abs_diff_eq!(duals[0].mu1, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_violation_keeps_duals_fixed() {
        let case = three_bus_case();
        let dataset = synthetic_dataset(&case, 3, 3, 5);
        // construct an exactly balanced iterate: forecasts at zero, p covers
        // demand at bus 0's gen, real time absorbs w exactly
        let theta = vec![vec![0.0; 3]; 2];
        let dispatch: Vec<DispatchDecision> = dataset
            .samples
            .iter()
            .map(|s| {
                let mut d = DispatchDecision::zeros(3);
                d.p[0] = case.demand.iter().sum::<f64>();
                d.r_dn[0] = s.wind_mw.iter().sum::<f64>();
                d
            })
            .collect();
        let mut duals: Vec<RawDuals> = dataset
            .samples
            .iter()
            .map(|_| RawDuals {
                mu1: 17.0,
                mu2: 3.0,
                ..RawDuals::zeros(3)
            })
            .collect();
        // flow slacks are strictly positive here, so κ stay at zero and the
        // balance duals must not move
        let before = duals.clone();
        dual_update(&case, &dataset, &theta, &dispatch, &mut duals, 0.7);
        for (a, b) in duals.iter().zip(&before) {
            assert_abs_diff_eq!(a.mu1, b.mu1, epsilon = 1e-12);
            assert_abs_diff_eq!(a.mu2, b.mu2, epsilon = 1e-12);
        }
    }
}
