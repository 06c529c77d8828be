//! Regime runs: per-sample sequential market clearing under a forecast
//! rule, with settlement attached.

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{
    verify_equilibrium, EqError, EquilibriumSolution, GameConfig,
};
use crate::market::{
    clear_day_ahead, clear_real_time, equilibrium_lmps, settle, ClearingError, Dataset,
    DispatchDecision, NetworkCase, PriceSystem, RawDuals, RegressionProfile, Settlement,
};
use crate::qp::{QpBackend, SolveSettings};

/// Forecast rule of a benchmark regime.
#[derive(Debug, Clone)]
pub enum Regime {
    /// Perfect foresight: ŵ = w.
    Oracle,
    /// Forecasts from a fixed regression profile; optionally clipped to
    /// [0, capacity] (off by default, coordinated forecasts may leave the
    /// data range).
    Profile {
        profile: RegressionProfile,
        clip: bool,
    },
}

impl Regime {
    fn forecast_mw(&self, case: &NetworkCase, dataset: &Dataset, i: usize) -> Vec<f64> {
        match self {
            Regime::Oracle => dataset.samples[i].wind_mw.clone(),
            Regime::Profile { profile, clip } => {
                let mut fc = profile.forecast_mw(case, &dataset.samples[i].features);
                if *clip {
                    for (f, cap) in fc.iter_mut().zip(&case.wind_cap) {
                        *f = f.clamp(0.0, *cap);
                    }
                }
                fc
            }
        }
    }
}

/// One sample's sequential clearing with its price system and settlement.
#[derive(Debug, Clone, Serialize)]
pub struct SampleClearing {
    pub sample_id: usize,
    pub forecast_mw: Vec<f64>,
    pub decision: DispatchDecision,
    pub prices: PriceSystem,
    /// Day-ahead objective ‖p‖²_C + cᵀp, $.
    pub cost_da: f64,
    /// Incremental real-time cost, $.
    pub cost_rt: f64,
    pub settlement: Settlement,
    pub max_kkt_residual: f64,
    pub max_reg_overlap: f64,
}

impl SampleClearing {
    pub fn total_cost(&self) -> f64 {
        self.cost_da + self.cost_rt
    }
}

/// Clears every sample of the split under the regime's forecasts,
/// sequentially per sample (day-ahead first, then real time), in parallel
/// across samples. Infeasible samples are reported by id.
pub fn run_regime(
    case: &NetworkCase,
    dataset: &Dataset,
    regime: &Regime,
    gamma: &[f64],
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<Vec<SampleClearing>, (usize, ClearingError)> {
    dataset
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            let fc = regime.forecast_mw(case, dataset, i);
            let mut forecast_bus = vec![0.0; case.n_bus];
            let mut actual_bus = vec![0.0; case.n_bus];
            for (j, &bus) in case.wind_bus.iter().enumerate() {
                forecast_bus[bus] += fc[j];
                actual_bus[bus] += sample.wind_mw[j];
            }

            let da = clear_day_ahead(case, &forecast_bus, backend, settings)
                .map_err(|e| (sample.id, e))?;
            let rt = clear_real_time(case, &da.p, &forecast_bus, &actual_bus, backend, settings)
                .map_err(|e| (sample.id, e))?;

            let duals = RawDuals {
                mu1: da.mu1,
                mu2: rt.mu2,
                kbar1: da.kbar1.clone(),
                kun1: da.kun1.clone(),
                kbar2: rt.kbar2.clone(),
                kun2: rt.kun2.clone(),
            };
            let (lmp_da, lmp_rt) = equilibrium_lmps(&duals, &case.ptdf, case.n_bus)
                .expect("clearing dual dimensions match the case");

            let decision = DispatchDecision {
                p: da.p.clone(),
                r_up: rt.r_up.clone(),
                r_dn: rt.r_dn.clone(),
                shed: rt.shed.clone(),
            };
            let settlement = settle(&lmp_da, &lmp_rt, &fc, &decision, sample, case, gamma);
            let max_reg_overlap = decision
                .r_up
                .iter()
                .zip(&decision.r_dn)
                .map(|(u, d)| u * d)
                .fold(0.0, f64::max);

            Ok(SampleClearing {
                sample_id: sample.id,
                forecast_mw: fc,
                decision,
                prices: PriceSystem {
                    duals,
                    lmp_da,
                    lmp_rt,
                },
                cost_da: da.objective,
                cost_rt: rt.incremental_cost,
                settlement,
                max_kkt_residual: da.kkt.max().max(rt.kkt.max()),
                max_reg_overlap,
            })
        })
        .collect()
}

/// Perfect-foresight benchmark: the real-time stage carries no deviation.
pub fn oracle_run(
    case: &NetworkCase,
    dataset: &Dataset,
    gamma: &[f64],
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<Vec<SampleClearing>, (usize, ClearingError)> {
    run_regime(case, dataset, &Regime::Oracle, gamma, backend, settings)
}

/// Mean settlement aggregates of a clearing set: per-farm revenue,
/// generator profit, demand charge.
pub fn settle_clearings(clearings: &[SampleClearing], n_farm: usize) -> (Vec<f64>, f64, f64) {
    let n = clearings.len() as f64;
    let mut farm = vec![0.0; n_farm];
    let mut gen = 0.0;
    let mut demand = 0.0;
    for c in clearings {
        for j in 0..n_farm {
            farm[j] += c.settlement.wind_profit[j] / n;
        }
        gen += c.settlement.gen_profit / n;
        demand += c.settlement.demand_charge / n;
    }
    (farm, gen, demand)
}

/// ΔR of one farm: the additional profit available from an optimal
/// unilateral model change, with everyone else's model fixed and prices
/// re-derived. Delegates to the no-deviation verifier.
#[allow(clippy::too_many_arguments)]
pub fn deviation_incentive(
    sol: &EquilibriumSolution,
    farm: usize,
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<f64, EqError> {
    let report = verify_equilibrium(sol, case, dataset, cfg, 0, 0, backend, settings)?;
    Ok(report.farms[farm].gain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{dispatch_cost_report, forecast_rmse};
    use crate::fixtures::{one_bus_case, synthetic_dataset, three_bus_case};
    use crate::market::Sample;
    use crate::qp::ClarabelBackend;
    use approx::assert_abs_diff_eq;

    fn settings() -> SolveSettings {
        SolveSettings::default()
    }

    #[test]
    fn oracle_has_zero_real_time_cost() {
        let case = three_bus_case();
        let dataset = synthetic_dataset(&case, 6, 3, 7);
        let clearings =
            oracle_run(&case, &dataset, &[1e-4, 1e-4], &ClarabelBackend, &settings()).unwrap();
        for c in &clearings {
            assert!(c.cost_rt.abs() < 1e-4, "rt cost {}", c.cost_rt);
            assert!(c.max_reg_overlap <= 1e-6);
        }
        let report = dispatch_cost_report(&clearings, &clearings).unwrap();
        assert_abs_diff_eq!(report.cost_err_avg, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(report.cost_err_cvar10, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn one_bus_oracle_reproduces_hand_cost() {
        let case = one_bus_case();
        let dataset = Dataset {
            feature_dim: 1,
            samples: vec![Sample {
                id: 0,
                features: vec![0.5],
                wind_mw: vec![10.0],
            }],
        };
        let clearings =
            oracle_run(&case, &dataset, &[1e-4], &ClarabelBackend, &settings()).unwrap();
        assert_abs_diff_eq!(clearings[0].cost_da, 2000.0, epsilon = 1e-4);
        assert_abs_diff_eq!(clearings[0].total_cost(), 2000.0, epsilon = 1e-4);
    }

    #[test]
    fn rmse_of_constant_error_profile() {
        let case = three_bus_case();
        // profile predicting exactly 2 MW above truth at both farms needs
        // synthetic targets; build a 1-feature dataset instead
        let dataset = Dataset {
            feature_dim: 1,
            samples: (0..4)
                .map(|id| Sample {
                    id,
                    features: vec![1.0],
                    wind_mw: vec![10.0, 20.0],
                })
                .collect(),
        };
        let profile = RegressionProfile {
            theta: vec![vec![12.0 / 60.0], vec![22.0 / 80.0]],
        };
        assert_abs_diff_eq!(forecast_rmse(&profile, &case, &dataset), 2.0, epsilon = 1e-12);
        let perfect = RegressionProfile {
            theta: vec![vec![10.0 / 60.0], vec![20.0 / 80.0]],
        };
        assert_abs_diff_eq!(forecast_rmse(&perfect, &case, &dataset), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_sample_is_reported_by_id() {
        let mut case = one_bus_case();
        case.p_max = vec![20.0];
        let dataset = Dataset {
            feature_dim: 1,
            samples: vec![
                Sample { id: 7, features: vec![1.0], wind_mw: vec![45.0] },
                Sample { id: 8, features: vec![1.0], wind_mw: vec![2.0] },
            ],
        };
        // oracle forecast of sample 8 leaves 48 MW to serve with 20 MW
        let err = oracle_run(&case, &dataset, &[1e-4], &ClarabelBackend, &settings()).unwrap_err();
        assert_eq!(err.0, 8);
    }

    #[test]
    fn payment_balance_on_uncongested_samples() {
        // with uniform prices, producer price-revenues plus shed payments
        // equal the day-ahead demand charge
        let mut case = three_bus_case();
        case.line_limit = vec![1e5; 3];
        let dataset = synthetic_dataset(&case, 8, 3, 17);
        let clearings =
            oracle_run(&case, &dataset, &[0.0, 0.0], &ClarabelBackend, &settings()).unwrap();
        for c in &clearings {
            let wind: f64 = c.settlement.wind_price_revenue.iter().sum();
            let total_paid = wind + c.settlement.gen_price_revenue + c.settlement.shed_payment;
            let demand_paid: f64 = (0..case.n_bus)
                .map(|b| c.prices.lmp_da[b] * case.demand[b])
                .sum();
            assert_abs_diff_eq!(total_paid, demand_paid, epsilon = 1e-6 * demand_paid.abs().max(1.0));
        }
    }
}

#[cfg(test)]
mod probe {
    use super::*;
    use crate::fixtures::{synthetic_dataset, three_bus_case};
    use crate::market::{clear_day_ahead, clear_real_time};
    use crate::qp::{ClarabelBackend, DenseIpmBackend};

    #[test]
    #[ignore = "solver degeneracy probe"]
    fn reproduce_insufficient_progress() {
        let mut case = three_bus_case();
        case.line_limit = vec![1e5; 3];
        let dataset = synthetic_dataset(&case, 8, 3, 17);
        let sample = &dataset.samples[5];
        let mut actual = vec![0.0; 3];
        for (j, &bus) in case.wind_bus.iter().enumerate() {
            actual[bus] += sample.wind_mw[j];
        }
        let s = SolveSettings::default();
        let da = clear_day_ahead(&case, &actual, &ClarabelBackend, &s).unwrap();
        println!("da ok p={:?}", da.p);
        match clear_real_time(&case, &da.p, &actual, &actual, &ClarabelBackend, &s) {
            Ok(rt) => println!("rt ok {:?}", rt.r_up),
            Err(e) => println!("rt clarabel FAILED: {e}"),
        }
        match clear_real_time(&case, &da.p, &actual, &actual, &DenseIpmBackend, &s) {
            Ok(rt) => println!("rt dense ok {:?}", rt.r_up),
            Err(e) => println!("rt dense FAILED: {e}"),
        }
        for tol in [1e-7, 1e-6] {
            let s2 = SolveSettings::with_tol(tol);
            match clear_real_time(&case, &da.p, &actual, &actual, &ClarabelBackend, &s2) {
                Ok(_) => println!("rt clarabel tol {tol} ok"),
                Err(e) => println!("rt clarabel tol {tol} FAILED: {e}"),
            }
        }
    }
}
