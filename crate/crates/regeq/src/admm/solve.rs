//! The decentralized iteration: best responses, projected dual ascent,
//! price recomposition, termination on settled prices.

use thiserror::Error;

use crate::equilibrium::{EquilibriumDiagnostics, EquilibriumSolution, GameConfig};
use crate::market::{
    canonicalize_regulation, equilibrium_lmps, Dataset, DispatchDecision, NetworkCase,
    PriceSystem, RawDuals, RegressionProfile,
};
use crate::qp::{KktResiduals, QpBackend, SolveSettings};

use super::best_response::{
    assemble_dispatch, best_response_generators_signed, best_response_loads_signed,
    best_response_wind_signed,
};
use super::state::{sample_residuals, TraceRow};
use super::{dual_update, lmp_update, AdmmState, PenaltySign, StepSchedule};

#[derive(Debug, Error)]
pub enum AdmmError {
    #[error("best-response subproblem failed in {stage} stage: {detail}")]
    Subproblem {
        stage: &'static str,
        detail: String,
    },
    #[error("iteration limit reached before prices settled")]
    MaxIterReached(Box<AdmmOutput>),
    #[error("configuration invalid: {0}")]
    BadConfig(String),
}

/// Stop criteria: prices must move less than `tol` ($/MWh, max over
/// samples and buses) for `window` consecutive iterations.
#[derive(Debug, Clone)]
pub struct AdmmStop {
    pub tol: f64,
    pub max_iter: usize,
    pub window: usize,
}

impl Default for AdmmStop {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 2000,
            window: 5,
        }
    }
}

/// Optional warm start; any omitted part falls back to the cold start.
#[derive(Debug, Clone, Default)]
pub struct AdmmInit {
    pub duals: Option<Vec<RawDuals>>,
    pub theta: Option<Vec<Vec<f64>>>,
    pub dispatch: Option<Vec<DispatchDecision>>,
}

#[derive(Debug)]
pub struct AdmmOutput {
    pub solution: EquilibriumSolution,
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
    pub converged: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn admm_solve(
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
    schedule: &StepSchedule,
    stop: &AdmmStop,
    init: Option<AdmmInit>,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<AdmmOutput, AdmmError> {
    admm_solve_signed(
        case,
        dataset,
        cfg,
        schedule,
        stop,
        init,
        backend,
        settings,
        PenaltySign::Subtract,
    )
}

/// `sign` applies to the wind stage only: the flipped sign renders the
/// generator and load subproblems indefinite for any ρ > 0, so they always
/// penalize violation (see the sign-regression test).
#[allow(clippy::too_many_arguments)]
pub(crate) fn admm_solve_signed(
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
    schedule: &StepSchedule,
    stop: &AdmmStop,
    init: Option<AdmmInit>,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
    sign: PenaltySign,
) -> Result<AdmmOutput, AdmmError> {
    cfg.validate(case)
        .map_err(|e| AdmmError::BadConfig(e.to_string()))?;
    if stop.window == 0 || stop.max_iter == 0 {
        return Err(AdmmError::BadConfig("window and max_iter must be > 0".into()));
    }
    let started = std::time::Instant::now();

    let mut state = AdmmState::cold_start(case, dataset);
    if let Some(init) = init {
        if let Some(d) = init.duals {
            state.duals = d;
        }
        if let Some(t) = init.theta {
            state.theta = t;
        }
        if let Some(g) = init.dispatch {
            state.dispatch = g;
        }
        let (da, rt) = lmp_update(case, &state.duals);
        state.lmp_da = da;
        state.lmp_rt = rt;
    }

    let mut trace: Vec<TraceRow> = Vec::new();
    let mut settled = 0usize;
    let mut converged = false;

    while state.iteration < stop.max_iter {
        let k = state.iteration;
        let rho = schedule.rho(k);

        // Step 2: Jacobi best responses against λᵏ and iterate k−1; the
        // three stages are mutually independent and run concurrently
        let (theta_res, (gen_res, shed_res)) = rayon::join(
            || {
                best_response_wind_signed(
                    case, dataset, &state, &cfg.gamma, &cfg.tau, rho, backend, settings, sign,
                )
            },
            || {
                rayon::join(
                    || {
                        best_response_generators_signed(
                            case, dataset, &state, rho, backend, settings,
                            PenaltySign::Subtract,
                        )
                    },
                    || {
                        best_response_loads_signed(
                            case, dataset, &state, rho, backend, settings,
                            PenaltySign::Subtract,
                        )
                    },
                )
            },
        );
        let theta_next = theta_res?;
        let dispatch_next = assemble_dispatch(gen_res?, shed_res?);

        // Step 3: projected dual ascent at iterate k, then price update
        dual_update(case, dataset, &theta_next, &dispatch_next, &mut state.duals, rho);
        let (lmp_da_next, lmp_rt_next) = lmp_update(case, &state.duals);

        let mut max_change = 0.0f64;
        for i in 0..dataset.len() {
            for b in 0..case.n_bus {
                max_change = max_change
                    .max((lmp_da_next[i][b] - state.lmp_da[i][b]).abs())
                    .max((lmp_rt_next[i][b] - state.lmp_rt[i][b]).abs());
            }
        }

        let mut max_balance = 0.0f64;
        let mut max_flow = 0.0f64;
        for i in 0..dataset.len() {
            let res = sample_residuals(case, dataset, &theta_next, &dispatch_next, i);
            max_balance = max_balance.max(res.da_balance.abs()).max(res.rt_balance.abs());
            for l in 0..case.n_line() {
                max_flow = max_flow
                    .max(-res.da_slack_up[l])
                    .max(-res.da_slack_dn[l])
                    .max(-res.rt_slack_up[l])
                    .max(-res.rt_slack_dn[l]);
            }
        }
        max_flow = max_flow.max(0.0);

        state.theta = theta_next;
        state.dispatch = dispatch_next;
        state.lmp_da = lmp_da_next;
        state.lmp_rt = lmp_rt_next;
        state.iteration += 1;

        let farm_profits = profits_at_prices(case, dataset, cfg, &state);
        trace.push(TraceRow {
            iteration: k,
            rho,
            max_lmp_change: max_change,
            max_balance_violation: max_balance,
            max_flow_excess: max_flow,
            farm_profits,
        });

        if max_change < stop.tol {
            settled += 1;
            if settled >= stop.window {
                converged = true;
                break;
            }
        } else {
            settled = 0;
        }
    }

    let solution = assemble_solution(case, dataset, cfg, &state, started.elapsed().as_secs_f64(), backend);
    let output = AdmmOutput {
        solution,
        iterations: state.iteration,
        converged,
        trace,
    };
    if converged {
        Ok(output)
    } else {
        Err(AdmmError::MaxIterReached(Box::new(output)))
    }
}

/// Average per-farm profit at the state's prices and θ.
fn profits_at_prices(
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
    state: &AdmmState,
) -> Vec<f64> {
    let n = dataset.len() as f64;
    let mut out = vec![0.0; case.n_farm()];
    for (i, sample) in dataset.samples.iter().enumerate() {
        let fc = state.forecasts_mw(case, dataset, i);
        for j in 0..case.n_farm() {
            let bus = case.wind_bus[j];
            let w = sample.wind_mw[j];
            out[j] += (state.lmp_da[i][bus] * fc[j] + state.lmp_rt[i][bus] * (w - fc[j])
                - cfg.gamma[j] * (fc[j] - w) * (fc[j] - w))
                / n;
        }
    }
    out
}

fn assemble_solution(
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
    state: &AdmmState,
    seconds: f64,
    backend: &dyn QpBackend,
) -> EquilibriumSolution {
    let n = dataset.len() as f64;
    let mut dispatch = state.dispatch.clone();
    let mut objective = 0.0;
    let mut prices = Vec::with_capacity(dataset.len());
    let mut min_dual = f64::INFINITY;
    for (i, d) in dispatch.iter_mut().enumerate() {
        canonicalize_regulation(&mut d.r_up, &mut d.r_dn);
        objective += crate::market::social_cost(case, d) / n;
        let fc = state.forecasts_mw(case, dataset, i);
        for j in 0..case.n_farm() {
            objective += cfg.gamma[j] * (fc[j] - dataset.samples[i].wind_mw[j]).powi(2) / n;
        }
        min_dual = min_dual.min(state.duals[i].min_value());
        let (lmp_da, lmp_rt) = equilibrium_lmps(&state.duals[i], &case.ptdf, case.n_bus)
            .expect("state dimensions are fixed");
        prices.push(PriceSystem {
            duals: state.duals[i].clone(),
            lmp_da,
            lmp_rt,
        });
    }
    EquilibriumSolution {
        theta: RegressionProfile {
            theta: state.theta.clone(),
        },
        dispatch,
        prices,
        objective,
        diagnostics: EquilibriumDiagnostics {
            kkt: KktResiduals::default(),
            solve_seconds: seconds,
            min_dual: if min_dual.is_finite() { min_dual } else { 0.0 },
            backend: backend.name().to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{farm_profits, solve_equilibrium};
    use crate::fixtures::{one_bus_case, synthetic_dataset, three_bus_case};
    use crate::market::Sample;
    use crate::qp::ClarabelBackend;

    fn settings() -> SolveSettings {
        SolveSettings::default()
    }

    #[test]
    fn equilibrium_initialization_is_a_fixed_point() {
        let case = three_bus_case();
        let dataset = synthetic_dataset(&case, 8, 3, 101);
        let cfg = GameConfig::uniform(2, 0.05, 10.0);
        let central =
            solve_equilibrium(&case, &dataset, &cfg, &ClarabelBackend, &settings()).unwrap();
        let init = AdmmInit {
            duals: Some(central.prices.iter().map(|p| p.duals.clone()).collect()),
            theta: Some(central.theta.theta.clone()),
            dispatch: Some(central.dispatch.clone()),
        };
        let schedule = StepSchedule::constant(1e-3);
        let stop = AdmmStop { tol: 1e-3, max_iter: 50, window: 1 };
        let out = admm_solve(
            &case, &dataset, &cfg, &schedule, &stop, Some(init), &ClarabelBackend, &settings(),
        )
        .expect("fixed point converges immediately");
        assert!(out.converged);
        assert!(out.iterations <= 2, "took {} iterations", out.iterations);
        let last = out.trace.last().unwrap();
        assert!(last.max_lmp_change < 1e-3);
        assert!(last.max_balance_violation < 1e-4);
    }

    #[test]
    fn zero_step_size_freezes_prices() {
        // ρ > 0 is required by the schedule type; the degenerate sanity
        // case is expressed at the update level: a zero step leaves every
        // dual, and hence every price, unchanged
        let case = three_bus_case();
        let dataset = synthetic_dataset(&case, 4, 3, 7);
        let theta = vec![vec![0.3, 0.1, 0.0], vec![0.0, 0.4, 0.1]];
        let dispatch: Vec<crate::market::DispatchDecision> = (0..4)
            .map(|_| {
                let mut d = crate::market::DispatchDecision::zeros(3);
                d.p[0] = 55.0;
                d
            })
            .collect();
        let mut duals: Vec<crate::market::RawDuals> = (0..4)
            .map(|_| crate::market::RawDuals {
                mu1: 21.0,
                mu2: 14.0,
                ..crate::market::RawDuals::zeros(3)
            })
            .collect();
        let before = duals.clone();
        dual_update(&case, &dataset, &theta, &dispatch, &mut duals, 0.0);
        for (a, b) in duals.iter().zip(&before) {
            assert_eq!(a.mu1, b.mu1);
            assert_eq!(a.mu2, b.mu2);
            assert_eq!(a.kbar1, b.kbar1);
        }
        let (da_before, rt_before) = lmp_update(&case, &before);
        let (da_after, rt_after) = lmp_update(&case, &duals);
        assert_eq!(da_before, da_after);
        assert_eq!(rt_before, rt_after);
    }

    /// The augmentation penalties as printed in the source formulation
    /// carry a "+" on a maximized profit, rewarding constraint violation.
    /// Two facts pin the implemented "−" down: under "+" the generator and
    /// load subproblems are indefinite (no best response exists for any
    /// ρ > 0), and the wind best response becomes repelling — from a
    /// perturbed anchor it moves the forecast to *amplify* the imbalance,
    /// so the iteration walks away from the fixed point instead of
    /// contracting onto it.
    #[test]
    fn printed_penalty_sign_diverges() {
        // generators under "+": rejected as non-convex for any ρ > 0
        {
            let case = three_bus_case();
            let dataset = synthetic_dataset(&case, 2, 3, 3);
            let state = AdmmState::cold_start(&case, &dataset);
            let err = super::super::best_response::best_response_generators_signed(
                &case, &dataset, &state, 0.5, &ClarabelBackend, &settings(),
                PenaltySign::AddAsPrinted,
            )
            .unwrap_err();
            assert!(
                err.to_string().contains("not positive semidefinite"),
                "expected indefiniteness rejection, got: {err}"
            );
        }

        // wind under "+": the response amplifies a balance surplus that the
        // implemented sign contracts
        let case = one_bus_case();
        let dataset = Dataset {
            feature_dim: 1,
            samples: vec![
                Sample { id: 0, features: vec![0.8], wind_mw: vec![11.0] },
                Sample { id: 1, features: vec![0.5], wind_mw: vec![7.5] },
            ],
        };
        let cfg = GameConfig::uniform(1, 5.0, 10.0);
        let central =
            solve_equilibrium(&case, &dataset, &cfg, &ClarabelBackend, &settings()).unwrap();
        let mut state = AdmmState::cold_start(&case, &dataset);
        state.duals = central.prices.iter().map(|p| p.duals.clone()).collect();
        let (da, rt) = lmp_update(&case, &state.duals);
        state.lmp_da = da;
        state.lmp_rt = rt;
        state.theta = central.theta.theta.clone();
        state.dispatch = central.dispatch.clone();
        // perturb the generator anchor: +3 MW surplus in every sample
        for d in state.dispatch.iter_mut() {
            d.p[0] += 3.0;
        }
        let rho = 2.0;
        let run_sign = |sign: PenaltySign| -> Vec<f64> {
            super::super::best_response::best_response_wind_signed(
                &case, &dataset, &state, &cfg.gamma, &cfg.tau, rho, &ClarabelBackend,
                &settings(), sign,
            )
            .unwrap()
            .remove(0)
        };
        let theta_sub = run_sign(PenaltySign::Subtract);
        let theta_add = run_sign(PenaltySign::AddAsPrinted);
        let theta_eq = &central.theta.theta[0];
        // mean forecast shift relative to the equilibrium row
        let shift = |theta: &[f64]| -> f64 {
            dataset
                .samples
                .iter()
                .map(|s| {
                    case.wind_cap[0]
                        * (theta[0] - theta_eq[0])
                        * s.features[0]
                })
                .sum::<f64>()
                / dataset.len() as f64
        };
        let sub_shift = shift(&theta_sub);
        let add_shift = shift(&theta_add);
        assert!(
            sub_shift < -0.2,
            "violation-penalizing response must cut the forecast against a surplus, got {sub_shift}"
        );
        assert!(
            add_shift > 0.2,
            "printed sign must amplify the surplus instead, got {add_shift}"
        );
    }

    #[test]
    fn desk_case_converges_to_central_prices() {
        // compressed rehearsal of the acceptance-scale equivalence run
        let case = three_bus_case();
        let dataset = synthetic_dataset(&case, 10, 3, 101);
        let cfg = GameConfig::uniform(2, 0.05, 10.0);
        let central =
            solve_equilibrium(&case, &dataset, &cfg, &ClarabelBackend, &settings()).unwrap();
        let schedule = StepSchedule::anneal_hold_quench(0.05, 6e-3, 6000, 2e-4).unwrap();
        let stop = AdmmStop { tol: 1e-5, max_iter: 6500, window: 20 };
        let out = match admm_solve(
            &case, &dataset, &cfg, &schedule, &stop, None, &ClarabelBackend, &settings(),
        ) {
            Ok(o) => o,
            Err(AdmmError::MaxIterReached(o)) => *o,
            Err(e) => panic!("{e}"),
        };
        let mut lmp_gap = 0.0f64;
        for i in 0..dataset.len() {
            for b in 0..case.n_bus {
                lmp_gap = lmp_gap
                    .max((out.solution.prices[i].lmp_da[b] - central.prices[i].lmp_da[b]).abs())
                    .max((out.solution.prices[i].lmp_rt[b] - central.prices[i].lmp_rt[b]).abs());
            }
        }
        let mut theta_gap = 0.0f64;
        for j in 0..2 {
            for k in 0..3 {
                theta_gap = theta_gap
                    .max((out.solution.theta.theta[j][k] - central.theta.theta[j][k]).abs());
            }
        }
        assert!(lmp_gap <= 1e-2, "lmp gap {lmp_gap}");
        assert!(theta_gap <= 1e-2, "theta gap {theta_gap}");
        // converged profits track the central ones
        let admm_profits = farm_profits(&out.solution, &case, &dataset, &cfg);
        let central_profits = farm_profits(&central, &case, &dataset, &cfg);
        for (a, c) in admm_profits.iter().zip(&central_profits) {
            assert!((a - c).abs() <= 1e-2 * (1.0 + c.abs()), "profit {a} vs {c}");
        }
    }
}
