//! Per-sample clearing of the day-ahead and real-time stages, plus the
//! anticipative joint clearing used when a fixed regression profile is
//! embedded into the coordination problem.

use thiserror::Error;

use crate::qp::{solve_qp, KktResiduals, QpBackend, QpStatus, QuadraticProgram, SolveSettings};

use super::{DispatchDecision, NetworkCase, RawDuals};

#[derive(Debug, Error)]
pub enum ClearingError {
    #[error("market stage infeasible: {backend}")]
    Infeasible { backend: String },
    #[error("solver failed: {backend}")]
    UnboundedOrNumerical { backend: String },
    #[error("forecast/actual vectors must be bus-indexed")]
    DimensionMismatch,
}

fn status_error(status: QpStatus) -> ClearingError {
    match status {
        QpStatus::Infeasible { backend } => ClearingError::Infeasible { backend },
        QpStatus::MaxIter { backend } | QpStatus::Numerical { backend } => {
            ClearingError::UnboundedOrNumerical { backend }
        }
        QpStatus::Optimal => unreachable!("optimal status is not an error"),
    }
}

#[derive(Debug, Clone)]
pub struct DayAheadResult {
    /// Day-ahead schedule, bus-indexed MW.
    pub p: Vec<f64>,
    pub mu1: f64,
    pub kbar1: Vec<f64>,
    pub kun1: Vec<f64>,
    /// Eq-objective value ‖p‖²_C + cᵀp, $.
    pub objective: f64,
    pub kkt: KktResiduals,
}

#[derive(Debug, Clone)]
pub struct RealTimeResult {
    pub r_up: Vec<f64>,
    pub r_dn: Vec<f64>,
    pub shed: Vec<f64>,
    pub mu2: f64,
    pub kbar2: Vec<f64>,
    pub kun2: Vec<f64>,
    /// Full re-dispatch objective including the carried ‖p*+r⁺−r⁻‖²_C term, $.
    pub objective: f64,
    /// Objective minus the ‖p*‖²_C constant: zero when nothing deviates, $.
    pub incremental_cost: f64,
    pub kkt: KktResiduals,
}

#[derive(Debug, Clone)]
pub struct JointClearing {
    pub decision: DispatchDecision,
    pub duals: RawDuals,
    /// Two-stage social cost cᵀp + ‖p+r⁺−r⁻‖²_C + c⁺ᵀr⁺ − c⁻ᵀr⁻ + ‖ℓ‖²_S + sᵀℓ, $.
    pub objective: f64,
    pub kkt: KktResiduals,
}

/// Row (F·x)_l of the PTDF against a bus-indexed vector.
fn flow(case: &NetworkCase, l: usize, x: &[f64]) -> f64 {
    case.ptdf[l].iter().zip(x).map(|(f, v)| f * v).sum()
}

/// Clears the day-ahead stage for one forecast vector.
///
/// `forecast` is bus-indexed MW (zeros away from wind buses) and is *not*
/// clipped to farm capacity: coordinated forecasts may intentionally leave
/// the data range.
pub fn clear_day_ahead(
    case: &NetworkCase,
    forecast: &[f64],
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<DayAheadResult, ClearingError> {
    if forecast.len() != case.n_bus {
        return Err(ClearingError::DimensionMismatch);
    }
    let gens = case.gen_buses();
    let nl = case.n_line();

    let mut qp = QuadraticProgram::new(gens.len());
    for (k, &g) in gens.iter().enumerate() {
        qp.add_quad_cost(k, k, case.gen_cost_quad[g]);
        qp.add_lin_cost(k, case.gen_cost_lin[g]);
    }

    // net injection offset ŵ − d
    let offset: Vec<f64> = forecast
        .iter()
        .zip(&case.demand)
        .map(|(w, d)| w - d)
        .collect();

    let balance_row = qp.add_eq(
        gens.iter().enumerate().map(|(k, _)| (k, 1.0)),
        -offset.iter().sum::<f64>(),
    );
    let mut flow_up = Vec::with_capacity(nl);
    let mut flow_dn = Vec::with_capacity(nl);
    for l in 0..nl {
        let base = flow(case, l, &offset);
        let coeffs: Vec<(usize, f64)> = gens
            .iter()
            .enumerate()
            .map(|(k, &g)| (k, case.ptdf[l][g]))
            .collect();
        flow_up.push(qp.add_ineq(coeffs.clone(), case.line_limit[l] - base));
        flow_dn.push(qp.add_ineq(
            coeffs.iter().map(|&(k, v)| (k, -v)),
            case.line_limit[l] + base,
        ));
    }
    for (k, &g) in gens.iter().enumerate() {
        qp.add_ineq([(k, 1.0)], case.p_max[g]);
        qp.add_ineq([(k, -1.0)], -case.p_min[g]);
    }

    let sol = solve_qp(backend, &qp, settings);
    if !sol.status.is_optimal() {
        return Err(status_error(sol.status));
    }

    let mut p = vec![0.0; case.n_bus];
    for (k, &g) in gens.iter().enumerate() {
        p[g] = sol.x[k];
    }
    Ok(DayAheadResult {
        p,
        mu1: -sol.y_eq[balance_row],
        kbar1: flow_up.iter().map(|&r| sol.y_ineq[r]).collect(),
        kun1: flow_dn.iter().map(|&r| sol.y_ineq[r]).collect(),
        objective: sol.objective,
        kkt: sol.kkt,
    })
}

/// Clears the real-time stage given the day-ahead schedule, the submitted
/// forecast and the realization.
pub fn clear_real_time(
    case: &NetworkCase,
    p_star: &[f64],
    forecast: &[f64],
    actual: &[f64],
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<RealTimeResult, ClearingError> {
    if p_star.len() != case.n_bus || forecast.len() != case.n_bus || actual.len() != case.n_bus {
        return Err(ClearingError::DimensionMismatch);
    }
    let gens = case.gen_buses();
    let loads = case.load_buses();
    let (nd, nl) = (loads.len(), case.n_line());

    // Snap the schedule onto its box: day-ahead solves leave tolerance-level
    // noise that would otherwise produce regulation intervals with no
    // interior, which interior-point backends cannot traverse. Regulation
    // variables are only instantiated where real headroom exists.
    let headroom = 1e-7;
    let p_star: Vec<f64> = (0..case.n_bus)
        .map(|b| p_star[b].clamp(case.p_min[b], case.p_max[b]))
        .collect();
    let mut up_idx: Vec<Option<usize>> = vec![None; case.n_bus];
    let mut dn_idx: Vec<Option<usize>> = vec![None; case.n_bus];
    let mut next = 0usize;
    for &g in &gens {
        let scale = 1.0 + case.p_max[g].abs().max(case.p_min[g].abs());
        if case.p_max[g] - p_star[g] > headroom * scale {
            up_idx[g] = Some(next);
            next += 1;
        }
        if p_star[g] - case.p_min[g] > headroom * scale {
            dn_idx[g] = Some(next);
            next += 1;
        }
    }
    let shed_off = next;
    let mut qp = QuadraticProgram::new(next + nd);

    let quad_const: f64 = gens
        .iter()
        .map(|&g| case.gen_cost_quad[g] * p_star[g] * p_star[g])
        .sum();
    for &g in &gens {
        let c = case.gen_cost_quad[g];
        // ‖p* + r+ − r−‖²_C expanded around the fixed schedule
        if let Some(u) = up_idx[g] {
            qp.add_quad_cost(u, u, c);
            qp.add_lin_cost(u, 2.0 * c * p_star[g] + case.reg_up_cost[g]);
        }
        if let Some(d) = dn_idx[g] {
            qp.add_quad_cost(d, d, c);
            qp.add_lin_cost(d, -2.0 * c * p_star[g] - case.reg_dn_cost[g]);
        }
        if let (Some(u), Some(d)) = (up_idx[g], dn_idx[g]) {
            qp.add_quad_cost(u, d, -2.0 * c);
        }
    }
    for (k, &b) in loads.iter().enumerate() {
        qp.add_quad_cost(shed_off + k, shed_off + k, case.shed_cost_quad[b]);
        qp.add_lin_cost(shed_off + k, case.shed_cost_lin[b]);
    }

    // 1ᵀ(r+ − r− + w − ŵ + ℓ) = 0
    let deviation: f64 = actual
        .iter()
        .zip(forecast)
        .map(|(w, wf)| w - wf)
        .sum();
    let balance_row = qp.add_eq(
        gens.iter()
            .filter_map(|&g| up_idx[g].map(|u| (u, 1.0)))
            .chain(gens.iter().filter_map(|&g| dn_idx[g].map(|d| (d, -1.0))))
            .chain((0..nd).map(|k| (shed_off + k, 1.0))),
        -deviation,
    );

    // flows on p* + r+ − r− + w + ℓ − d
    let mut base = vec![0.0; case.n_bus];
    for b in 0..case.n_bus {
        base[b] = p_star[b] + actual[b] - case.demand[b];
    }
    let mut flow_up = Vec::with_capacity(nl);
    let mut flow_dn = Vec::with_capacity(nl);
    for l in 0..nl {
        let coeffs: Vec<(usize, f64)> = gens
            .iter()
            .flat_map(|&g| {
                [
                    up_idx[g].map(|u| (u, case.ptdf[l][g])),
                    dn_idx[g].map(|d| (d, -case.ptdf[l][g])),
                ]
            })
            .flatten()
            .chain(
                loads
                    .iter()
                    .enumerate()
                    .map(|(k, &b)| Some((shed_off + k, case.ptdf[l][b])))
                    .flatten(),
            )
            .collect();
        let cst = flow(case, l, &base);
        flow_up.push(qp.add_ineq(coeffs.clone(), case.line_limit[l] - cst));
        flow_dn.push(qp.add_ineq(
            coeffs.iter().map(|&(k, v)| (k, -v)),
            case.line_limit[l] + cst,
        ));
    }

    for &g in &gens {
        // p_min ≤ p* + r+ − r− ≤ p_max and the per-direction caps
        match (up_idx[g], dn_idx[g]) {
            (Some(u), Some(d)) => {
                qp.add_ineq([(u, 1.0), (d, -1.0)], case.p_max[g] - p_star[g]);
                qp.add_ineq([(u, -1.0), (d, 1.0)], p_star[g] - case.p_min[g]);
            }
            _ => {}
        }
        if let Some(u) = up_idx[g] {
            qp.add_ineq([(u, 1.0)], case.p_max[g] - p_star[g]);
            qp.add_ineq([(u, -1.0)], 0.0);
        }
        if let Some(d) = dn_idx[g] {
            qp.add_ineq([(d, 1.0)], p_star[g] - case.p_min[g]);
            qp.add_ineq([(d, -1.0)], 0.0);
        }
    }
    for (k, &b) in loads.iter().enumerate() {
        qp.add_ineq([(shed_off + k, 1.0)], case.demand[b]);
        qp.add_ineq([(shed_off + k, -1.0)], 0.0);
    }

    let sol = solve_qp(backend, &qp, settings);
    if !sol.status.is_optimal() {
        return Err(status_error(sol.status));
    }

    let mut r_up = vec![0.0; case.n_bus];
    let mut r_dn = vec![0.0; case.n_bus];
    let mut shed = vec![0.0; case.n_bus];
    for &g in &gens {
        if let Some(u) = up_idx[g] {
            r_up[g] = sol.x[u];
        }
        if let Some(d) = dn_idx[g] {
            r_dn[g] = sol.x[d];
        }
    }
    for (k, &b) in loads.iter().enumerate() {
        shed[b] = sol.x[shed_off + k];
    }
    canonicalize_regulation(&mut r_up, &mut r_dn);

    let objective = real_time_objective(case, &p_star, &r_up, &r_dn, &shed);
    Ok(RealTimeResult {
        r_up,
        r_dn,
        shed,
        mu2: -sol.y_eq[balance_row],
        kbar2: flow_up.iter().map(|&r| sol.y_ineq[r]).collect(),
        kun2: flow_dn.iter().map(|&r| sol.y_ineq[r]).collect(),
        objective,
        incremental_cost: objective - quad_const,
        kkt: sol.kkt,
    })
}

/// Anticipative clearing of both stages in one QP: used when a regression
/// profile is held fixed inside the coordination problem.
pub fn clear_joint(
    case: &NetworkCase,
    forecast: &[f64],
    actual: &[f64],
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<JointClearing, ClearingError> {
    if forecast.len() != case.n_bus || actual.len() != case.n_bus {
        return Err(ClearingError::DimensionMismatch);
    }
    let gens = case.gen_buses();
    let loads = case.load_buses();
    let (ng, nd, nl) = (gens.len(), loads.len(), case.n_line());
    let (p_off, up_off, dn_off, shed_off) = (0, ng, 2 * ng, 3 * ng);
    let mut qp = QuadraticProgram::new(3 * ng + nd);

    for (k, &g) in gens.iter().enumerate() {
        let c = case.gen_cost_quad[g];
        // c · (p + r+ − r−)² expanded over the three coupled variables
        qp.add_quad_cost(p_off + k, p_off + k, c);
        qp.add_quad_cost(up_off + k, up_off + k, c);
        qp.add_quad_cost(dn_off + k, dn_off + k, c);
        qp.add_quad_cost(p_off + k, up_off + k, 2.0 * c);
        qp.add_quad_cost(p_off + k, dn_off + k, -2.0 * c);
        qp.add_quad_cost(up_off + k, dn_off + k, -2.0 * c);
        qp.add_lin_cost(p_off + k, case.gen_cost_lin[g]);
        qp.add_lin_cost(up_off + k, case.reg_up_cost[g]);
        qp.add_lin_cost(dn_off + k, -case.reg_dn_cost[g]);
    }
    for (k, &b) in loads.iter().enumerate() {
        qp.add_quad_cost(shed_off + k, shed_off + k, case.shed_cost_quad[b]);
        qp.add_lin_cost(shed_off + k, case.shed_cost_lin[b]);
    }

    let da_offset: Vec<f64> = forecast
        .iter()
        .zip(&case.demand)
        .map(|(w, d)| w - d)
        .collect();
    let da_balance = qp.add_eq(
        (0..ng).map(|k| (p_off + k, 1.0)),
        -da_offset.iter().sum::<f64>(),
    );
    let deviation: f64 = actual.iter().zip(forecast).map(|(w, wf)| w - wf).sum();
    let rt_balance = qp.add_eq(
        (0..ng)
            .map(|k| (up_off + k, 1.0))
            .chain((0..ng).map(|k| (dn_off + k, -1.0)))
            .chain((0..nd).map(|k| (shed_off + k, 1.0))),
        -deviation,
    );

    let mut da_up = Vec::with_capacity(nl);
    let mut da_dn = Vec::with_capacity(nl);
    let mut rt_up = Vec::with_capacity(nl);
    let mut rt_dn = Vec::with_capacity(nl);
    let rt_offset: Vec<f64> = actual
        .iter()
        .zip(&case.demand)
        .map(|(w, d)| w - d)
        .collect();
    for l in 0..nl {
        let da_coeffs: Vec<(usize, f64)> = gens
            .iter()
            .enumerate()
            .map(|(k, &g)| (p_off + k, case.ptdf[l][g]))
            .collect();
        let da_base = flow(case, l, &da_offset);
        da_up.push(qp.add_ineq(da_coeffs.clone(), case.line_limit[l] - da_base));
        da_dn.push(qp.add_ineq(
            da_coeffs.iter().map(|&(k, v)| (k, -v)),
            case.line_limit[l] + da_base,
        ));

        let rt_coeffs: Vec<(usize, f64)> = gens
            .iter()
            .enumerate()
            .flat_map(|(k, &g)| {
                [
                    (p_off + k, case.ptdf[l][g]),
                    (up_off + k, case.ptdf[l][g]),
                    (dn_off + k, -case.ptdf[l][g]),
                ]
            })
            .chain(
                loads
                    .iter()
                    .enumerate()
                    .map(|(k, &b)| (shed_off + k, case.ptdf[l][b])),
            )
            .collect();
        let rt_base = flow(case, l, &rt_offset);
        rt_up.push(qp.add_ineq(rt_coeffs.clone(), case.line_limit[l] - rt_base));
        rt_dn.push(qp.add_ineq(
            rt_coeffs.iter().map(|&(k, v)| (k, -v)),
            case.line_limit[l] + rt_base,
        ));
    }

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
    for (k, &b) in loads.iter().enumerate() {
        qp.add_ineq([(shed_off + k, 1.0)], case.demand[b]);
        qp.add_ineq([(shed_off + k, -1.0)], 0.0);
    }

    let sol = solve_qp(backend, &qp, settings);
    if !sol.status.is_optimal() {
        return Err(status_error(sol.status));
    }

    let mut decision = DispatchDecision::zeros(case.n_bus);
    for (k, &g) in gens.iter().enumerate() {
        decision.p[g] = sol.x[p_off + k];
        decision.r_up[g] = sol.x[up_off + k];
        decision.r_dn[g] = sol.x[dn_off + k];
    }
    for (k, &b) in loads.iter().enumerate() {
        decision.shed[b] = sol.x[shed_off + k];
    }
    canonicalize_regulation(&mut decision.r_up, &mut decision.r_dn);

    let duals = RawDuals {
        mu1: -sol.y_eq[da_balance],
        mu2: -sol.y_eq[rt_balance],
        kbar1: da_up.iter().map(|&r| sol.y_ineq[r]).collect(),
        kun1: da_dn.iter().map(|&r| sol.y_ineq[r]).collect(),
        kbar2: rt_up.iter().map(|&r| sol.y_ineq[r]).collect(),
        kun2: rt_dn.iter().map(|&r| sol.y_ineq[r]).collect(),
    };
    let objective = social_cost(case, &decision);
    Ok(JointClearing {
        decision,
        duals,
        objective,
        kkt: sol.kkt,
    })
}

/// Removes the cost-dominated overlap of simultaneous up/down regulation.
/// The aggregate p + r+ − r− is untouched, so flows, balances, prices and
/// stationarity are all preserved while r+ · r− becomes exactly zero.
pub fn canonicalize_regulation(r_up: &mut [f64], r_dn: &mut [f64]) {
    for (up, dn) in r_up.iter_mut().zip(r_dn.iter_mut()) {
        let overlap = up.min(*dn).max(0.0);
        *up -= overlap;
        *dn -= overlap;
    }
}

/// Eq-2a value for given decisions.
pub fn real_time_objective(
    case: &NetworkCase,
    p_star: &[f64],
    r_up: &[f64],
    r_dn: &[f64],
    shed: &[f64],
) -> f64 {
    let mut v = 0.0;
    for b in 0..case.n_bus {
        let u = p_star[b] + r_up[b] - r_dn[b];
        v += case.gen_cost_quad[b] * u * u
            + case.reg_up_cost[b] * r_up[b]
            - case.reg_dn_cost[b] * r_dn[b]
            + case.shed_cost_quad[b] * shed[b] * shed[b]
            + case.shed_cost_lin[b] * shed[b];
    }
    v
}

/// Two-stage social cost of one sample's decisions.
pub fn social_cost(case: &NetworkCase, d: &DispatchDecision) -> f64 {
    let mut v = 0.0;
    for b in 0..case.n_bus {
        let u = d.p[b] + d.r_up[b] - d.r_dn[b];
        v += case.gen_cost_quad[b] * u * u
            + case.gen_cost_lin[b] * d.p[b]
            + case.reg_up_cost[b] * d.r_up[b]
            - case.reg_dn_cost[b] * d.r_dn[b]
            + case.shed_cost_quad[b] * d.shed[b] * d.shed[b]
            + case.shed_cost_lin[b] * d.shed[b];
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{equilibrium_lmps, permute_buses};
    use crate::qp::{ClarabelBackend, DenseIpmBackend, SolveSettings};
    use approx::assert_abs_diff_eq;

    use crate::fixtures::{one_bus_case, three_bus_case};

    fn settings() -> SolveSettings {
        SolveSettings::default()
    }

    #[test]
    fn day_ahead_hand_case() {
        let case = one_bus_case();
        case.validate().unwrap();
        let da = clear_day_ahead(&case, &[10.0], &ClarabelBackend, &settings()).unwrap();
        // stationarity 2Cp + c = μ₁ at p = d − ŵ = 40
        assert_abs_diff_eq!(da.p[0], 40.0, epsilon = 1e-6);
        assert_abs_diff_eq!(da.mu1, 90.0, epsilon = 1e-6);
        assert_abs_diff_eq!(da.objective, 2000.0, epsilon = 1e-5);
        assert!(da.kkt.max() < 1e-6);
    }

    #[test]
    fn forecast_covering_demand_clears_at_zero() {
        let case = one_bus_case();
        let da = clear_day_ahead(&case, &[50.0], &ClarabelBackend, &settings()).unwrap();
        assert_abs_diff_eq!(da.p[0], 0.0, epsilon = 1e-6);
        assert!(da.objective.abs() < 1e-5);
    }

    #[test]
    fn real_time_shortfall_prices_upward_regulation() {
        let case = one_bus_case();
        let da = clear_day_ahead(&case, &[10.0], &ClarabelBackend, &settings()).unwrap();
        let rt =
            clear_real_time(&case, &da.p, &[10.0], &[5.0], &ClarabelBackend, &settings()).unwrap();
        // 2C(p* + r+) + c+ = μ₂ with r+ = 5
        assert_abs_diff_eq!(rt.r_up[0], 5.0, epsilon = 1e-6);
        assert_abs_diff_eq!(rt.r_dn[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(rt.mu2, 190.0, epsilon = 1e-5);
        assert!(rt.kkt.max() < 1e-6);
    }

    #[test]
    fn real_time_surplus_prices_downward_regulation() {
        let case = one_bus_case();
        let da = clear_day_ahead(&case, &[10.0], &ClarabelBackend, &settings()).unwrap();
        let rt =
            clear_real_time(&case, &da.p, &[10.0], &[15.0], &ClarabelBackend, &settings()).unwrap();
        // 2C(p* − r−) + c− = μ₂ with r− = 5
        assert_abs_diff_eq!(rt.r_dn[0], 5.0, epsilon = 1e-6);
        assert_abs_diff_eq!(rt.mu2, 70.5, epsilon = 1e-5);
    }

    #[test]
    fn zero_deviation_needs_no_regulation() {
        let case = one_bus_case();
        let da = clear_day_ahead(&case, &[10.0], &ClarabelBackend, &settings()).unwrap();
        let rt =
            clear_real_time(&case, &da.p, &[10.0], &[10.0], &ClarabelBackend, &settings()).unwrap();
        assert!(rt.r_up[0].abs() < 1e-6 && rt.r_dn[0].abs() < 1e-6 && rt.shed[0].abs() < 1e-6);
        assert!(rt.incremental_cost.abs() < 1e-5);
    }

    #[test]
    fn regulation_price_brackets_day_ahead_price() {
        // under-forecast (w > ŵ) must clear real time below day-ahead,
        // over-forecast above it
        let case = one_bus_case();
        let da = clear_day_ahead(&case, &[20.0], &ClarabelBackend, &settings()).unwrap();
        for actual in [25.0, 30.0, 40.0] {
            let rt = clear_real_time(&case, &da.p, &[20.0], &[actual], &ClarabelBackend, &settings())
                .unwrap();
            assert!(rt.mu2 < da.mu1, "surplus must price below μ₁");
        }
        for actual in [5.0, 10.0, 15.0] {
            let rt = clear_real_time(&case, &da.p, &[20.0], &[actual], &ClarabelBackend, &settings())
                .unwrap();
            assert!(rt.mu2 > da.mu1, "shortfall must price above μ₁");
        }
    }

    #[test]
    fn infeasible_demand_is_reported() {
        let mut case = one_bus_case();
        case.p_max = vec![20.0];
        // d = 50, ŵ = 0, p ≤ 20: unservable
        let err = clear_day_ahead(&case, &[0.0], &ClarabelBackend, &settings()).unwrap_err();
        assert!(matches!(err, ClearingError::Infeasible { .. }));
    }

    #[test]
    fn up_and_down_regulation_never_overlap() {
        let case = one_bus_case();
        let da = clear_day_ahead(&case, &[10.0], &ClarabelBackend, &settings()).unwrap();
        for actual in [0.0, 5.0, 10.0, 15.0, 25.0] {
            let rt = clear_real_time(&case, &da.p, &[10.0], &[actual], &ClarabelBackend, &settings())
                .unwrap();
            assert!(rt.r_up[0] * rt.r_dn[0] <= 1e-6);
        }
    }


    #[test]
    fn cross_solver_objective_agreement() {
        let case = three_bus_case();
        case.validate().unwrap();
        let fine = settings();
        let a = clear_day_ahead(&case, &[0.0; 3], &ClarabelBackend, &fine).unwrap();
        let b = clear_day_ahead(&case, &[0.0; 3], &DenseIpmBackend, &fine).unwrap();
        let rel = (a.objective - b.objective).abs() / a.objective.abs();
        assert!(rel < 1e-5, "cross-solver relative gap {rel}");
    }

    #[test]
    fn clearing_invariant_under_bus_permutation() {
        let case = three_bus_case();
        let perm = [2usize, 0, 1];
        let permuted = permute_buses(&case, &perm);
        permuted.validate().unwrap();
        let fc = [10.0, 40.0, 0.0];
        let fc_perm: Vec<f64> = perm.iter().map(|&old| fc[old]).collect();
        let a = clear_day_ahead(&case, &fc, &ClarabelBackend, &settings()).unwrap();
        let b = clear_day_ahead(&permuted, &fc_perm, &ClarabelBackend, &settings()).unwrap();
        assert_abs_diff_eq!(a.objective, b.objective, epsilon = 1e-6);
        assert_abs_diff_eq!(a.mu1, b.mu1, epsilon = 1e-6);
    }

    #[test]
    fn joint_clearing_matches_sequential_on_single_bus() {
        // one bus leaves no anticipation freedom: both routes coincide
        let case = one_bus_case();
        let da = clear_day_ahead(&case, &[10.0], &ClarabelBackend, &settings()).unwrap();
        let rt =
            clear_real_time(&case, &da.p, &[10.0], &[5.0], &ClarabelBackend, &settings()).unwrap();
        let joint = clear_joint(&case, &[10.0], &[5.0], &ClarabelBackend, &settings()).unwrap();
        assert_abs_diff_eq!(joint.decision.p[0], da.p[0], epsilon = 1e-5);
        assert_abs_diff_eq!(joint.decision.r_up[0], rt.r_up[0], epsilon = 1e-5);
        assert_abs_diff_eq!(joint.duals.mu2, rt.mu2, epsilon = 1e-4);
        // anticipative day-ahead price clears at delivered marginal cost,
        // above the myopic sequential price 2Cp + c
        let delivered = joint.decision.p[0] + joint.decision.r_up[0] - joint.decision.r_dn[0];
        let expect_mu1 = 2.0 * case.gen_cost_quad[0] * delivered + case.gen_cost_lin[0];
        assert_abs_diff_eq!(joint.duals.mu1, expect_mu1, epsilon = 1e-4);
        assert!(joint.duals.mu1 > da.mu1);
        let seq_total = da.objective + rt.incremental_cost;
        assert_abs_diff_eq!(joint.objective, seq_total, epsilon = 1e-4);
    }

    #[test]
    fn lmps_from_clearing_duals_stay_uniform_without_congestion() {
        let case = three_bus_case();
        let fc = [20.0, 30.0, 0.0];
        let actual = [25.0, 20.0, 0.0];
        let da = clear_day_ahead(&case, &fc, &ClarabelBackend, &settings()).unwrap();
        let rt =
            clear_real_time(&case, &da.p, &fc, &actual, &ClarabelBackend, &settings()).unwrap();
        let duals = RawDuals {
            mu1: da.mu1,
            mu2: rt.mu2,
            kbar1: da.kbar1.clone(),
            kun1: da.kun1.clone(),
            kbar2: rt.kbar2.clone(),
            kun2: rt.kun2.clone(),
        };
        let (lmp_da, lmp_rt) = equilibrium_lmps(&duals, &case.ptdf, case.n_bus).unwrap();
        for b in 0..3 {
            assert_abs_diff_eq!(lmp_da[b], da.mu1, epsilon = 1e-4);
            assert_abs_diff_eq!(lmp_rt[b], rt.mu2, epsilon = 1e-4);
        }
    }
}
