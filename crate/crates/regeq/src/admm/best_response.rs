//! Price-taking best responses augmented with shared-constraint penalties.
//!
//! All three participant classes maximize profit at the posted prices
//! minus quadratic penalties on the balance residuals and hinge penalties
//! on flow-limit excesses, each anchored at the opponents' previous
//! iterate. Hinges are modeled with nonnegative slack variables so every
//! subproblem stays a standard-form QP.

use rayon::prelude::*;

use crate::features::FarmSeries;
use crate::market::{Dataset, DispatchDecision, NetworkCase};
use crate::qp::{solve_qp, QpBackend, QuadraticProgram, SolveSettings};

use super::solve::AdmmError;
use super::{AdmmState, PenaltySign};

/// Everything a wind farm is allowed to see besides its own data: prices
/// at its bus, balance and flow aggregates of the previous iterate with
/// its own forecast removed, and its own network column.
#[derive(Debug, Clone)]
pub struct WindPublicSignal {
    /// Per sample: day-ahead and real-time price at the farm's bus.
    pub lambda_da: Vec<f64>,
    pub lambda_rt: Vec<f64>,
    /// Per sample: 1ᵀp^(k−1) + Σ_{j'≠j} ŵ_{j'}^(k−1) − 1ᵀd.
    pub da_balance_base: Vec<f64>,
    /// Per sample: 1ᵀ(r⁺−r⁻)^(k−1) − Σ_{j'≠j} ŵ_{j'}^(k−1) + 1ᵀw + 1ᵀℓ^(k−1).
    pub rt_balance_base: Vec<f64>,
    /// Per sample, per line: F(p^(k−1) − d) + Σ_{j'≠j} F[·,bus_{j'}] ŵ_{j'}^(k−1).
    pub da_flow_base: Vec<Vec<f64>>,
    /// The farm's own PTDF column.
    pub ptdf_col: Vec<f64>,
    pub line_limit: Vec<f64>,
}

/// Assembles the public signal of farm `j` from the shared state.
fn wind_signal(
    case: &NetworkCase,
    dataset: &Dataset,
    state: &AdmmState,
    j: usize,
) -> WindPublicSignal {
    let n = dataset.len();
    let nl = case.n_line();
    let bus_j = case.wind_bus[j];
    let mut sig = WindPublicSignal {
        lambda_da: Vec::with_capacity(n),
        lambda_rt: Vec::with_capacity(n),
        da_balance_base: Vec::with_capacity(n),
        rt_balance_base: Vec::with_capacity(n),
        da_flow_base: Vec::with_capacity(n),
        ptdf_col: (0..nl).map(|l| case.ptdf[l][bus_j]).collect(),
        line_limit: case.line_limit.clone(),
    };
    for i in 0..n {
        sig.lambda_da.push(state.lmp_da[i][bus_j]);
        sig.lambda_rt.push(state.lmp_rt[i][bus_j]);
        let d = &state.dispatch[i];
        let others: f64 = state
            .forecasts_mw(case, dataset, i)
            .iter()
            .enumerate()
            .filter(|&(jj, _)| jj != j)
            .map(|(_, fc)| fc)
            .sum();
        let p_total: f64 = d.p.iter().sum();
        let demand_total: f64 = case.demand.iter().sum();
        sig.da_balance_base.push(p_total + others - demand_total);
        let reg_total: f64 = d.r_up.iter().sum::<f64>() - d.r_dn.iter().sum::<f64>();
        let wind_total: f64 = dataset.samples[i].wind_mw.iter().sum();
        let shed_total: f64 = d.shed.iter().sum();
        sig.rt_balance_base
            .push(reg_total - others + wind_total + shed_total);

        let fc_all = state.forecasts_mw(case, dataset, i);
        let mut rows = Vec::with_capacity(nl);
        for l in 0..nl {
            let mut base = 0.0;
            for b in 0..case.n_bus {
                base += case.ptdf[l][b] * (d.p[b] - case.demand[b]);
            }
            for (jj, &bus) in case.wind_bus.iter().enumerate() {
                if jj != j {
                    base += case.ptdf[l][bus] * fc_all[jj];
                }
            }
            rows.push(base);
        }
        sig.da_flow_base.push(rows);
    }
    sig
}

/// One farm's augmented best response, computable from its own series and
/// the public signal alone. Real-time flow penalties drop out because the
/// forecast cancels between the two stages.
pub fn best_response_wind_farm(
    series: &FarmSeries,
    gamma: f64,
    tau: f64,
    rho: f64,
    signal: &WindPublicSignal,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<Vec<f64>, AdmmError> {
    best_response_wind_farm_signed(
        series,
        gamma,
        tau,
        rho,
        signal,
        backend,
        settings,
        PenaltySign::Subtract,
    )
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn best_response_wind_farm_signed(
    series: &FarmSeries,
    gamma: f64,
    tau: f64,
    rho: f64,
    signal: &WindPublicSignal,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
    sign: PenaltySign,
) -> Result<Vec<f64>, AdmmError> {
    let n = series.len();
    let m = series.feature_dim();
    let nl = signal.line_limit.len();
    let cap = series.capacity_mw;
    let pen = sign.factor() * rho;

    // layout: θ, t, then per sample 2·nl hinge slacks for the two
    // day-ahead flow signs
    let n_slack = if rho > 0.0 { n * 2 * nl } else { 0 };
    let mut qp = QuadraticProgram::new(2 * m + n_slack);
    let theta = 0..m;
    let t_aux = m..2 * m;
    let slack0 = 2 * m;

    for i in 0..n {
        let phi = &series.phi[i];
        let w_mw = series.power[i] * cap;
        // profit terms: −(λ₁ − λ₂)·cap·θᵀφ, plus the regression loss
        let spread = signal.lambda_da[i] - signal.lambda_rt[i];
        for k in 0..m {
            qp.add_lin_cost(k, -spread * cap * phi[k]);
        }
        // γ(cap θᵀφ − w)²
        for a in 0..m {
            qp.add_quad_cost(a, a, gamma * cap * cap * phi[a] * phi[a]);
            for bb in a + 1..m {
                qp.add_quad_cost(a, bb, 2.0 * gamma * cap * cap * phi[a] * phi[bb]);
            }
            qp.add_lin_cost(a, -2.0 * gamma * cap * w_mw * phi[a]);
        }
        if rho == 0.0 {
            continue;
        }
        // (ρ/2)(base + cap θᵀφ)² and (ρ/2)(base − cap θᵀφ)²
        for (base, s) in [
            (signal.da_balance_base[i], 1.0),
            (signal.rt_balance_base[i], -1.0),
        ] {
            for a in 0..m {
                qp.add_quad_cost(a, a, 0.5 * pen * cap * cap * phi[a] * phi[a]);
                for bb in a + 1..m {
                    qp.add_quad_cost(a, bb, pen * cap * cap * phi[a] * phi[bb]);
                }
                qp.add_lin_cost(a, pen * base * s * cap * phi[a]);
            }
        }
        // day-ahead flow hinges: slack ≥ base + F_col·cap·θᵀφ − f̄ (upper)
        // and ≥ −f̄ − base − F_col·cap·θᵀφ (lower), cost (ρ/2)s²
        for l in 0..nl {
            let up = slack0 + i * 2 * nl + 2 * l;
            let dn = up + 1;
            qp.add_quad_cost(up, up, 0.5 * pen);
            qp.add_quad_cost(dn, dn, 0.5 * pen);
            let col = signal.ptdf_col[l] * cap;
            let coeffs_up: Vec<(usize, f64)> = (0..m)
                .map(|k| (k, col * phi[k]))
                .chain(std::iter::once((up, -1.0)))
                .collect();
            qp.add_ineq(coeffs_up, signal.line_limit[l] - signal.da_flow_base[i][l]);
            let coeffs_dn: Vec<(usize, f64)> = (0..m)
                .map(|k| (k, -col * phi[k]))
                .chain(std::iter::once((dn, -1.0)))
                .collect();
            qp.add_ineq(coeffs_dn, signal.line_limit[l] + signal.da_flow_base[i][l]);
            qp.add_ineq([(up, -1.0)], 0.0);
            qp.add_ineq([(dn, -1.0)], 0.0);
        }
    }

    crate::qp::encode_l1_ball(&mut qp, &theta, &t_aux, tau)
        .map_err(|e| AdmmError::Subproblem {
            stage: "wind",
            detail: e.to_string(),
        })?;

    let sol = solve_qp(backend, &qp, settings);
    if !sol.status.is_optimal() {
        return Err(AdmmError::Subproblem {
            stage: "wind",
            detail: sol.status.to_string(),
        });
    }
    Ok(sol.x[..m].to_vec())
}

/// Step-2 wind update: per-farm solves against public signals, in
/// parallel when farms are numerous.
pub fn best_response_wind(
    case: &NetworkCase,
    dataset: &Dataset,
    state: &AdmmState,
    gamma: &[f64],
    tau: &[f64],
    rho: f64,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<Vec<Vec<f64>>, AdmmError> {
    best_response_wind_signed(
        case,
        dataset,
        state,
        gamma,
        tau,
        rho,
        backend,
        settings,
        PenaltySign::Subtract,
    )
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn best_response_wind_signed(
    case: &NetworkCase,
    dataset: &Dataset,
    state: &AdmmState,
    gamma: &[f64],
    tau: &[f64],
    rho: f64,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
    sign: PenaltySign,
) -> Result<Vec<Vec<f64>>, AdmmError> {
    (0..case.n_farm())
        .into_par_iter()
        .map(|j| {
            let series = FarmSeries {
                phi: dataset.samples.iter().map(|s| s.features.clone()).collect(),
                power: dataset
                    .samples
                    .iter()
                    .map(|s| s.wind_mw[j] / case.wind_cap[j])
                    .collect(),
                capacity_mw: case.wind_cap[j],
            };
            let signal = wind_signal(case, dataset, state, j);
            best_response_wind_farm_signed(
                &series, gamma[j], tau[j], rho, &signal, backend, settings, sign,
            )
        })
        .collect()
}

/// Step-2 generator update: per-sample QPs against the posted prices with
/// the other participants at their previous iterate.
#[allow(clippy::too_many_arguments)]
pub fn best_response_generators(
    case: &NetworkCase,
    dataset: &Dataset,
    state: &AdmmState,
    rho: f64,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>, AdmmError> {
    best_response_generators_signed(
        case,
        dataset,
        state,
        rho,
        backend,
        settings,
        PenaltySign::Subtract,
    )
}

pub(crate) fn best_response_generators_signed(
    case: &NetworkCase,
    dataset: &Dataset,
    state: &AdmmState,
    rho: f64,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
    sign: PenaltySign,
) -> Result<Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>, AdmmError> {
    let gens = case.gen_buses();
    let (ng, nl) = (gens.len(), case.n_line());
    let pen = sign.factor() * rho;
    let demand_total: f64 = case.demand.iter().sum();
    let n = dataset.len();

    // per-sample blocks are independent; batching them into one sparse QP
    // avoids per-solve setup overhead
    let n_slack = if rho > 0.0 { 4 * nl } else { 0 };
    let block = 3 * ng + n_slack;
    let mut qp = QuadraticProgram::new(n * block);

    for i in 0..n {
        let base = i * block;
        let (p_off, up_off, dn_off, slack0) = (base, base + ng, base + 2 * ng, base + 3 * ng);
        let fc = state.forecasts_mw(case, dataset, i);
        let fc_total: f64 = fc.iter().sum();
        let shed_prev = &state.dispatch[i].shed;
        let wind_total: f64 = dataset.samples[i].wind_mw.iter().sum();
        let shed_total: f64 = shed_prev.iter().sum();

        for (k, &g) in gens.iter().enumerate() {
            let c = case.gen_cost_quad[g];
            qp.add_quad_cost(p_off + k, p_off + k, c);
            qp.add_quad_cost(up_off + k, up_off + k, c);
            qp.add_quad_cost(dn_off + k, dn_off + k, c);
            qp.add_quad_cost(p_off + k, up_off + k, 2.0 * c);
            qp.add_quad_cost(p_off + k, dn_off + k, -2.0 * c);
            qp.add_quad_cost(up_off + k, dn_off + k, -2.0 * c);
            qp.add_lin_cost(p_off + k, case.gen_cost_lin[g] - state.lmp_da[i][g]);
            qp.add_lin_cost(up_off + k, case.reg_up_cost[g] - state.lmp_rt[i][g]);
            qp.add_lin_cost(dn_off + k, -case.reg_dn_cost[g] + state.lmp_rt[i][g]);
        }

        if rho > 0.0 {
            // (ρ/2)(1ᵀp + base_da)² with base_da = Σŵ^(k−1) − 1ᵀd
            let base_da = fc_total - demand_total;
            for a in 0..ng {
                qp.add_quad_cost(p_off + a, p_off + a, 0.5 * pen);
                for bb in a + 1..ng {
                    qp.add_quad_cost(p_off + a, p_off + bb, pen);
                }
                qp.add_lin_cost(p_off + a, pen * base_da);
            }
            // (ρ/2)(1ᵀ(r+−r−) + base_rt)²
            let base_rt = -fc_total + wind_total + shed_total;
            for a in 0..ng {
                qp.add_quad_cost(up_off + a, up_off + a, 0.5 * pen);
                qp.add_quad_cost(dn_off + a, dn_off + a, 0.5 * pen);
                for bb in a + 1..ng {
                    qp.add_quad_cost(up_off + a, up_off + bb, pen);
                    qp.add_quad_cost(dn_off + a, dn_off + bb, pen);
                }
                for bb in 0..ng {
                    // up_off + a < dn_off + bb always holds
                    qp.add_quad_cost(up_off + a, dn_off + bb, -pen);
                }
                qp.add_lin_cost(up_off + a, pen * base_rt);
                qp.add_lin_cost(dn_off + a, -pen * base_rt);
            }

            // flow hinges, day-ahead (p only) and real-time (p, r±)
            let mut actual_bus = vec![0.0; case.n_bus];
            for (j, &bus) in case.wind_bus.iter().enumerate() {
                actual_bus[bus] += dataset.samples[i].wind_mw[j];
            }
            let mut fc_bus = vec![0.0; case.n_bus];
            for (j, &bus) in case.wind_bus.iter().enumerate() {
                fc_bus[bus] += fc[j];
            }
            for l in 0..nl {
                let mut da_base = 0.0;
                let mut rt_base = 0.0;
                for b in 0..case.n_bus {
                    da_base += case.ptdf[l][b] * (fc_bus[b] - case.demand[b]);
                    rt_base += case.ptdf[l][b] * (actual_bus[b] + shed_prev[b] - case.demand[b]);
                }
                let s_base = slack0 + 4 * l;
                for s in 0..4 {
                    qp.add_quad_cost(s_base + s, s_base + s, 0.5 * pen);
                    qp.add_ineq([(s_base + s, -1.0)], 0.0);
                }
                let p_cols: Vec<(usize, f64)> = gens
                    .iter()
                    .enumerate()
                    .map(|(k, &g)| (p_off + k, case.ptdf[l][g]))
                    .collect();
                qp.add_ineq(
                    p_cols.iter().cloned().chain([(s_base, -1.0)]),
                    case.line_limit[l] - da_base,
                );
                qp.add_ineq(
                    p_cols.iter().map(|&(v, c)| (v, -c)).chain([(s_base + 1, -1.0)]),
                    case.line_limit[l] + da_base,
                );
                let rt_cols: Vec<(usize, f64)> = gens
                    .iter()
                    .enumerate()
                    .flat_map(|(k, &g)| {
                        [
                            (p_off + k, case.ptdf[l][g]),
                            (up_off + k, case.ptdf[l][g]),
                            (dn_off + k, -case.ptdf[l][g]),
                        ]
                    })
                    .collect();
                qp.add_ineq(
                    rt_cols.iter().cloned().chain([(s_base + 2, -1.0)]),
                    case.line_limit[l] - rt_base,
                );
                qp.add_ineq(
                    rt_cols.iter().map(|&(v, c)| (v, -c)).chain([(s_base + 3, -1.0)]),
                    case.line_limit[l] + rt_base,
                );
            }
        }

        // private feasible set
        for (k, &g) in gens.iter().enumerate() {
            qp.add_ineq(
                [(p_off + k, 1.0), (up_off + k, 1.0), (dn_off + k, -1.0)],
                case.p_max[g],
            );
            qp.add_ineq(
                [(p_off + k, -1.0), (up_off + k, -1.0), (dn_off + k, 1.0)],
                -case.p_min[g],
            );
            qp.add_ineq([(up_off + k, 1.0), (p_off + k, 1.0)], case.p_max[g]);
            qp.add_ineq([(up_off + k, -1.0)], 0.0);
            qp.add_ineq([(dn_off + k, 1.0), (p_off + k, -1.0)], -case.p_min[g]);
            qp.add_ineq([(dn_off + k, -1.0)], 0.0);
        }
    }

    let sol = solve_qp(backend, &qp, settings);
    if !sol.status.is_optimal() {
        return Err(AdmmError::Subproblem {
            stage: "generators",
            detail: sol.status.to_string(),
        });
    }
    Ok((0..n)
        .map(|i| {
            let base = i * block;
            let mut p = vec![0.0; case.n_bus];
            let mut r_up = vec![0.0; case.n_bus];
            let mut r_dn = vec![0.0; case.n_bus];
            for (k, &g) in gens.iter().enumerate() {
                p[g] = sol.x[base + k];
                r_up[g] = sol.x[base + ng + k];
                r_dn[g] = sol.x[base + 2 * ng + k];
            }
            (p, r_up, r_dn)
        })
        .collect())
}

/// Step-2 load update: per-sample shedding QPs.
pub fn best_response_loads(
    case: &NetworkCase,
    dataset: &Dataset,
    state: &AdmmState,
    rho: f64,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<Vec<Vec<f64>>, AdmmError> {
    best_response_loads_signed(
        case,
        dataset,
        state,
        rho,
        backend,
        settings,
        PenaltySign::Subtract,
    )
}

pub(crate) fn best_response_loads_signed(
    case: &NetworkCase,
    dataset: &Dataset,
    state: &AdmmState,
    rho: f64,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
    sign: PenaltySign,
) -> Result<Vec<Vec<f64>>, AdmmError> {
    let loads = case.load_buses();
    let (nd, nl) = (loads.len(), case.n_line());
    let pen = sign.factor() * rho;
    let n = dataset.len();

    let n_slack = if rho > 0.0 { 2 * nl } else { 0 };
    let block = nd + n_slack;
    let mut qp = QuadraticProgram::new(n * block);

    for i in 0..n {
        let base_off = i * block;
        let slack0 = base_off + nd;
        let fc = state.forecasts_mw(case, dataset, i);
        let fc_total: f64 = fc.iter().sum();
        let d_prev = &state.dispatch[i];
        let wind_total: f64 = dataset.samples[i].wind_mw.iter().sum();
        let reg_total: f64 = d_prev.r_up.iter().sum::<f64>() - d_prev.r_dn.iter().sum::<f64>();

        for (k, &b) in loads.iter().enumerate() {
            qp.add_quad_cost(base_off + k, base_off + k, case.shed_cost_quad[b]);
            qp.add_lin_cost(base_off + k, case.shed_cost_lin[b] - state.lmp_rt[i][b]);
            qp.add_ineq([(base_off + k, 1.0)], case.demand[b]);
            qp.add_ineq([(base_off + k, -1.0)], 0.0);
        }
        if rho > 0.0 {
            let base_rt = reg_total - fc_total + wind_total;
            for a in 0..nd {
                qp.add_quad_cost(base_off + a, base_off + a, 0.5 * pen);
                for bb in a + 1..nd {
                    qp.add_quad_cost(base_off + a, base_off + bb, pen);
                }
                qp.add_lin_cost(base_off + a, pen * base_rt);
            }
            let mut actual_bus = vec![0.0; case.n_bus];
            for (j, &bus) in case.wind_bus.iter().enumerate() {
                actual_bus[bus] += dataset.samples[i].wind_mw[j];
            }
            for l in 0..nl {
                let mut base = 0.0;
                for b in 0..case.n_bus {
                    base += case.ptdf[l][b]
                        * (d_prev.p[b] + d_prev.r_up[b] - d_prev.r_dn[b] + actual_bus[b]
                            - case.demand[b]);
                }
                let (up, dn) = (slack0 + 2 * l, slack0 + 2 * l + 1);
                qp.add_quad_cost(up, up, 0.5 * pen);
                qp.add_quad_cost(dn, dn, 0.5 * pen);
                qp.add_ineq([(up, -1.0)], 0.0);
                qp.add_ineq([(dn, -1.0)], 0.0);
                let cols: Vec<(usize, f64)> = loads
                    .iter()
                    .enumerate()
                    .map(|(k, &b)| (base_off + k, case.ptdf[l][b]))
                    .collect();
                qp.add_ineq(
                    cols.iter().cloned().chain([(up, -1.0)]),
                    case.line_limit[l] - base,
                );
                qp.add_ineq(
                    cols.iter().map(|&(v, c)| (v, -c)).chain([(dn, -1.0)]),
                    case.line_limit[l] + base,
                );
            }
        }
    }

    let sol = solve_qp(backend, &qp, settings);
    if !sol.status.is_optimal() {
        return Err(AdmmError::Subproblem {
            stage: "loads",
            detail: sol.status.to_string(),
        });
    }
    Ok((0..n)
        .map(|i| {
            let mut shed = vec![0.0; case.n_bus];
            for (k, &b) in loads.iter().enumerate() {
                shed[b] = sol.x[i * block + k];
            }
            shed
        })
        .collect())
}

/// Bus-expanded dispatch assembled from the three best responses.
pub(crate) fn assemble_dispatch(
    gen: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    shed: Vec<Vec<f64>>,
) -> Vec<DispatchDecision> {
    gen.into_iter()
        .zip(shed)
        .map(|((p, r_up, r_dn), shed)| DispatchDecision {
            p,
            r_up,
            r_dn,
            shed,
        })
        .collect()
}
