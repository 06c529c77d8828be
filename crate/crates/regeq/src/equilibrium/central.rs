//! The centralized route: one QP over the regression profile and all
//! per-sample dispatch decisions, with prices recovered from its duals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use std::time::Instant;
use thiserror::Error;

use crate::market::{
    clear_joint, equilibrium_lmps, ClearingError, Dataset, DispatchDecision, NetworkCase,
    PriceSystem, RawDuals, RegressionProfile,
};
use crate::qp::{
    encode_l1_ball, solve_qp, KktResiduals, QpBackend, QpError, QpStatus, QuadraticProgram,
    SolveSettings,
};

#[derive(Debug, Error)]
pub enum EqError {
    #[error("dataset is empty or dimensioned inconsistently with the case")]
    DimensionMismatch,
    #[error("game config invalid: {0}")]
    BadConfig(String),
    #[error("coordination problem infeasible: {backend}")]
    Infeasible { backend: String },
    #[error("solver failed: {0}")]
    Solver(QpStatus),
    #[error("negative dual {name} = {value:.3e}; price extraction is unsound")]
    NegativeDual { name: String, value: f64 },
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("per-sample embedding failed at sample {id}: {source}")]
    Embed {
        id: usize,
        #[source]
        source: ClearingError,
    },
}

/// Private weights and strategy-set radii of the wind farms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameConfig {
    /// Regression-loss weight γⱼ per farm, $/MW² — strictly positive.
    pub gamma: Vec<f64>,
    /// ℓ1 radius τⱼ per farm (capacity-normalized units).
    pub tau: Vec<f64>,
}

impl GameConfig {
    pub fn uniform(n_farm: usize, gamma: f64, tau: f64) -> Self {
        Self {
            gamma: vec![gamma; n_farm],
            tau: vec![tau; n_farm],
        }
    }

    pub fn validate(&self, case: &NetworkCase) -> Result<(), EqError> {
        if self.gamma.len() != case.n_farm() || self.tau.len() != case.n_farm() {
            return Err(EqError::BadConfig(
                "gamma/tau must have one entry per farm".into(),
            ));
        }
        if self.gamma.iter().any(|&g| g <= 0.0) {
            return Err(EqError::BadConfig("gamma must be > 0".into()));
        }
        if self.tau.iter().any(|&t| t <= 0.0) {
            return Err(EqError::BadConfig("tau must be > 0".into()));
        }
        Ok(())
    }
}

/// Variable and row bookkeeping of the central QP, used for structured
/// extraction of decisions and prices.
#[derive(Debug, Clone)]
pub struct CentralIndex {
    pub gens: Vec<usize>,
    pub loads: Vec<usize>,
    /// Per farm: variable range of its θ row (None when held fixed).
    pub theta: Vec<Option<Range<usize>>>,
    /// Per sample, per farm: the forecast auxiliary variable (None = fixed).
    pub what: Vec<Vec<Option<usize>>>,
    pub p: Vec<Range<usize>>,
    pub r_up: Vec<Range<usize>>,
    pub r_dn: Vec<Range<usize>>,
    pub shed: Vec<Range<usize>>,
    pub da_balance: Vec<usize>,
    pub rt_balance: Vec<usize>,
    /// Per sample: interleaved (upper, lower) flow rows, 2·lines long.
    pub da_flow: Vec<Range<usize>>,
    pub rt_flow: Vec<Range<usize>>,
}

/// Builds the coordination QP in summed (not averaged) form, so constraint
/// duals read directly in $/MWh. The reported objective is divided by n.
///
/// `fixed` optionally pins selected farms' rows; pinned farms contribute
/// constants to balances and flows and carry no ℓ1 block.
pub(crate) fn build_central_with(
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
    fixed: &[Option<&[f64]>],
) -> Result<(QuadraticProgram, CentralIndex), EqError> {
    let n = dataset.len();
    let b = case.n_farm();
    let m = dataset.feature_dim;
    if n == 0 || fixed.len() != b {
        return Err(EqError::DimensionMismatch);
    }
    if dataset
        .samples
        .iter()
        .any(|s| s.features.len() != m || s.wind_mw.len() != b)
    {
        return Err(EqError::DimensionMismatch);
    }
    cfg.validate(case)?;

    let gens = case.gen_buses();
    let loads = case.load_buses();
    let (ng, nd, nl) = (gens.len(), loads.len(), case.n_line());
    let free: Vec<usize> = (0..b).filter(|&j| fixed[j].is_none()).collect();

    // layout: [θ_free][t_free] then per sample [what_free, p, r+, r−, ℓ]
    let mut next = 0usize;
    let mut alloc = |len: usize| {
        let r = next..next + len;
        next += len;
        r
    };
    let mut theta: Vec<Option<Range<usize>>> = vec![None; b];
    for &j in &free {
        theta[j] = Some(alloc(m));
    }
    let mut t_aux: Vec<Option<Range<usize>>> = vec![None; b];
    for &j in &free {
        t_aux[j] = Some(alloc(m));
    }
    let mut what: Vec<Vec<Option<usize>>> = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let mut r_up = Vec::with_capacity(n);
    let mut r_dn = Vec::with_capacity(n);
    let mut shed = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = vec![None; b];
        for &j in &free {
            row[j] = Some(alloc(1).start);
        }
        what.push(row);
        p.push(alloc(ng));
        r_up.push(alloc(ng));
        r_dn.push(alloc(ng));
        shed.push(alloc(nd));
    }

    let mut qp = QuadraticProgram::new(next);

    // per-farm fixed forecasts in MW, per sample
    let fixed_fc: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..b)
                .map(|j| match fixed[j] {
                    Some(th) => {
                        case.wind_cap[j]
                            * th.iter()
                                .zip(&dataset.samples[i].features)
                                .map(|(a, b)| a * b)
                                .sum::<f64>()
                    }
                    None => 0.0,
                })
                .collect()
        })
        .collect();

    let mut index = CentralIndex {
        gens: gens.clone(),
        loads: loads.clone(),
        theta,
        what,
        p,
        r_up,
        r_dn,
        shed,
        da_balance: Vec::with_capacity(n),
        rt_balance: Vec::with_capacity(n),
        da_flow: Vec::with_capacity(n),
        rt_flow: Vec::with_capacity(n),
    };

    let total_demand: f64 = case.demand.iter().sum();

    for (i, sample) in dataset.samples.iter().enumerate() {
        // objective: generation, regulation, shedding, regression loss
        for (k, &g) in gens.iter().enumerate() {
            let c = case.gen_cost_quad[g];
            let (vp, vu, vd) = (
                index.p[i].start + k,
                index.r_up[i].start + k,
                index.r_dn[i].start + k,
            );
            qp.add_quad_cost(vp, vp, c);
            qp.add_quad_cost(vu, vu, c);
            qp.add_quad_cost(vd, vd, c);
            qp.add_quad_cost(vp, vu, 2.0 * c);
            qp.add_quad_cost(vp, vd, -2.0 * c);
            qp.add_quad_cost(vu, vd, -2.0 * c);
            qp.add_lin_cost(vp, case.gen_cost_lin[g]);
            qp.add_lin_cost(vu, case.reg_up_cost[g]);
            qp.add_lin_cost(vd, -case.reg_dn_cost[g]);
        }
        for (k, &l) in loads.iter().enumerate() {
            let v = index.shed[i].start + k;
            qp.add_quad_cost(v, v, case.shed_cost_quad[l]);
            qp.add_lin_cost(v, case.shed_cost_lin[l]);
        }
        for &j in &free {
            let v = index.what[i][j].unwrap();
            qp.add_quad_cost(v, v, cfg.gamma[j]);
            qp.add_lin_cost(v, -2.0 * cfg.gamma[j] * sample.wind_mw[j]);
        }

        // forecast definition: what_ij = cap_j θ_jᵀ φ_i
        for &j in &free {
            let v = index.what[i][j].unwrap();
            let th = index.theta[j].clone().unwrap();
            let coeffs = std::iter::once((v, 1.0)).chain(
                th.clone()
                    .zip(sample.features.iter())
                    .map(|(tv, &phi)| (tv, -case.wind_cap[j] * phi)),
            );
            qp.add_eq(coeffs, 0.0);
        }

        let fixed_sum: f64 = fixed_fc[i].iter().sum();

        // day-ahead balance: 1ᵀ(p + ŵ − d) = 0
        let da_row = qp.add_eq(
            index.p[i]
                .clone()
                .map(|v| (v, 1.0))
                .chain(free.iter().map(|&j| (index.what[i][j].unwrap(), 1.0))),
            total_demand - fixed_sum,
        );
        index.da_balance.push(da_row);

        // real-time balance: 1ᵀ(r+ − r− − ŵ + w + ℓ) = 0
        let wind_total: f64 = sample.wind_mw.iter().sum();
        let rt_row = qp.add_eq(
            index.r_up[i]
                .clone()
                .map(|v| (v, 1.0))
                .chain(index.r_dn[i].clone().map(|v| (v, -1.0)))
                .chain(index.shed[i].clone().map(|v| (v, 1.0)))
                .chain(free.iter().map(|&j| (index.what[i][j].unwrap(), -1.0))),
            fixed_sum - wind_total,
        );
        index.rt_balance.push(rt_row);

        // flows
        let first_da = qp.num_ineq();
        if nl > 0 {
            for l in 0..nl {
                let base: f64 = (0..b)
                    .map(|j| case.ptdf[l][case.wind_bus[j]] * fixed_fc[i][j])
                    .sum::<f64>()
                    - case
                        .demand
                        .iter()
                        .enumerate()
                        .map(|(bus, d)| case.ptdf[l][bus] * d)
                        .sum::<f64>();
                let coeffs: Vec<(usize, f64)> = gens
                    .iter()
                    .enumerate()
                    .map(|(k, &g)| (index.p[i].start + k, case.ptdf[l][g]))
                    .chain(free.iter().map(|&j| {
                        (index.what[i][j].unwrap(), case.ptdf[l][case.wind_bus[j]])
                    }))
                    .collect();
                qp.add_ineq(coeffs.clone(), case.line_limit[l] - base);
                qp.add_ineq(
                    coeffs.iter().map(|&(v, c)| (v, -c)),
                    case.line_limit[l] + base,
                );
            }
        }
        index.da_flow.push(first_da..first_da + 2 * nl);

        let first_rt = qp.num_ineq();
        if nl > 0 {
            // forecast terms cancel between the two stages: real-time flows
            // see p + r+ − r− + w + ℓ − d
            let mut actual_bus = vec![0.0; case.n_bus];
            for (j, &bus) in case.wind_bus.iter().enumerate() {
                actual_bus[bus] += sample.wind_mw[j];
            }
            for l in 0..nl {
                let base: f64 = (0..case.n_bus)
                    .map(|bus| case.ptdf[l][bus] * (actual_bus[bus] - case.demand[bus]))
                    .sum();
                let coeffs: Vec<(usize, f64)> = gens
                    .iter()
                    .enumerate()
                    .flat_map(|(k, &g)| {
                        [
                            (index.p[i].start + k, case.ptdf[l][g]),
                            (index.r_up[i].start + k, case.ptdf[l][g]),
                            (index.r_dn[i].start + k, -case.ptdf[l][g]),
                        ]
                    })
                    .chain(
                        loads
                            .iter()
                            .enumerate()
                            .map(|(k, &bus)| (index.shed[i].start + k, case.ptdf[l][bus])),
                    )
                    .collect();
                qp.add_ineq(coeffs.clone(), case.line_limit[l] - base);
                qp.add_ineq(
                    coeffs.iter().map(|&(v, c)| (v, -c)),
                    case.line_limit[l] + base,
                );
            }
        }
        index.rt_flow.push(first_rt..first_rt + 2 * nl);

        // generator and load boxes
        for (k, &g) in gens.iter().enumerate() {
            let (vp, vu, vd) = (
                index.p[i].start + k,
                index.r_up[i].start + k,
                index.r_dn[i].start + k,
            );
            qp.add_ineq([(vp, 1.0), (vu, 1.0), (vd, -1.0)], case.p_max[g]);
            qp.add_ineq([(vp, -1.0), (vu, -1.0), (vd, 1.0)], -case.p_min[g]);
            qp.add_ineq([(vu, 1.0), (vp, 1.0)], case.p_max[g]);
            qp.add_ineq([(vu, -1.0)], 0.0);
            qp.add_ineq([(vd, 1.0), (vp, -1.0)], -case.p_min[g]);
            qp.add_ineq([(vd, -1.0)], 0.0);
        }
        for (k, &bus) in loads.iter().enumerate() {
            let v = index.shed[i].start + k;
            qp.add_ineq([(v, 1.0)], case.demand[bus]);
            qp.add_ineq([(v, -1.0)], 0.0);
        }
    }

    // strategy sets of the free farms
    for &j in &free {
        encode_l1_ball(
            &mut qp,
            index.theta[j].as_ref().unwrap(),
            t_aux[j].as_ref().unwrap(),
            cfg.tau[j],
        )?;
    }

    Ok((qp, index))
}

/// Extracts the up- or low-limit dual of line `l` from an interleaved
/// flow block.
fn flow_dual(y_ineq: &[f64], block: &Range<usize>, l: usize, upper: bool) -> f64 {
    y_ineq[block.start + 2 * l + usize::from(!upper)]
}

/// Public entry: full coordination QP with every farm free.
pub fn build_central_qp(
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
) -> Result<(QuadraticProgram, CentralIndex), EqError> {
    build_central_with(case, dataset, cfg, &vec![None; case.n_farm()])
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumDiagnostics {
    pub kkt: KktResiduals,
    pub solve_seconds: f64,
    /// Most negative raw dual seen during extraction; anything below
    /// −1e-8 aborts with `EqError::NegativeDual`.
    pub min_dual: f64,
    pub backend: String,
}

/// The coordinated profile with its per-sample dispatch and price system.
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub theta: RegressionProfile,
    pub dispatch: Vec<DispatchDecision>,
    pub prices: Vec<PriceSystem>,
    /// Regularized average social cost: the Corollary-style objective, $.
    pub objective: f64,
    pub diagnostics: EquilibriumDiagnostics,
}

impl EquilibriumSolution {
    /// Per-farm forecast in MW for sample `i`.
    pub fn forecast_mw(&self, case: &NetworkCase, dataset: &Dataset, i: usize) -> Vec<f64> {
        self.theta.forecast_mw(case, &dataset.samples[i].features)
    }
}

const DUAL_FLOOR: f64 = -1e-8;

/// Solves the coordination problem and recovers the supporting prices from
/// its constraint duals.
pub fn solve_equilibrium(
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<EquilibriumSolution, EqError> {
    let fixed = vec![None; case.n_farm()];
    solve_central_with(case, dataset, cfg, &fixed, backend, settings)
}

/// Shared solve path for the full problem and the fixed-opponent re-solves.
pub(crate) fn solve_central_with(
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
    fixed: &[Option<&[f64]>],
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<EquilibriumSolution, EqError> {
    let started = Instant::now();
    let (qp, index) = build_central_with(case, dataset, cfg, fixed)?;
    let sol = solve_qp(backend, &qp, settings);
    match &sol.status {
        QpStatus::Optimal => {}
        QpStatus::Infeasible { backend } => {
            return Err(EqError::Infeasible {
                backend: backend.clone(),
            })
        }
        other => return Err(EqError::Solver(other.clone())),
    }
    let n = dataset.len();
    let b = case.n_farm();
    let m = dataset.feature_dim;

    let mut theta_rows = Vec::with_capacity(b);
    for j in 0..b {
        match (&index.theta[j], fixed[j]) {
            (Some(range), _) => theta_rows.push(sol.x[range.clone()].to_vec()),
            (None, Some(vals)) => theta_rows.push(vals.to_vec()),
            (None, None) => theta_rows.push(vec![0.0; m]),
        }
    }

    let mut dispatch = Vec::with_capacity(n);
    let mut prices = Vec::with_capacity(n);
    let mut min_dual = f64::INFINITY;
    for i in 0..n {
        let mut d = DispatchDecision::zeros(case.n_bus);
        for (k, &g) in index.gens.iter().enumerate() {
            d.p[g] = sol.x[index.p[i].start + k];
            d.r_up[g] = sol.x[index.r_up[i].start + k];
            d.r_dn[g] = sol.x[index.r_dn[i].start + k];
        }
        for (k, &bus) in index.loads.iter().enumerate() {
            d.shed[bus] = sol.x[index.shed[i].start + k];
        }
        crate::market::canonicalize_regulation(&mut d.r_up, &mut d.r_dn);

        let nl = case.n_line();
        let mut duals = RawDuals {
            mu1: -sol.y_eq[index.da_balance[i]],
            mu2: -sol.y_eq[index.rt_balance[i]],
            kbar1: (0..nl)
                .map(|l| flow_dual(&sol.y_ineq, &index.da_flow[i], l, true))
                .collect(),
            kun1: (0..nl)
                .map(|l| flow_dual(&sol.y_ineq, &index.da_flow[i], l, false))
                .collect(),
            kbar2: (0..nl)
                .map(|l| flow_dual(&sol.y_ineq, &index.rt_flow[i], l, true))
                .collect(),
            kun2: (0..nl)
                .map(|l| flow_dual(&sol.y_ineq, &index.rt_flow[i], l, false))
                .collect(),
        };
        let lowest = duals.min_value();
        min_dual = min_dual.min(lowest);
        if lowest < DUAL_FLOOR {
            return Err(EqError::NegativeDual {
                name: format!("sample {i}"),
                value: lowest,
            });
        }
        clamp_duals(&mut duals);
        let (lmp_da, lmp_rt) = equilibrium_lmps(&duals, &case.ptdf, case.n_bus)
            .map_err(|_| EqError::DimensionMismatch)?;
        prices.push(PriceSystem {
            duals,
            lmp_da,
            lmp_rt,
        });
        dispatch.push(d);
    }
    if !min_dual.is_finite() {
        min_dual = 0.0;
    }

    // The solver sees the wind loss with its square completed (free farms)
    // or not at all (pinned farms); restore the full regularized objective.
    let mut loss_correction = 0.0;
    for (i, sample) in dataset.samples.iter().enumerate() {
        for j in 0..b {
            if index.theta[j].is_some() {
                loss_correction += cfg.gamma[j] * sample.wind_mw[j] * sample.wind_mw[j];
            } else {
                let fc = case.wind_cap[j]
                    * theta_rows[j]
                        .iter()
                        .zip(&sample.features)
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                loss_correction += cfg.gamma[j] * (fc - sample.wind_mw[j]).powi(2);
            }
        }
        let _ = i;
    }

    Ok(EquilibriumSolution {
        theta: RegressionProfile { theta: theta_rows },
        dispatch,
        prices,
        objective: (sol.objective + loss_correction) / n as f64,
        diagnostics: EquilibriumDiagnostics {
            kkt: sol.kkt,
            solve_seconds: started.elapsed().as_secs_f64(),
            min_dual,
            backend: backend.name().to_string(),
        },
    })
}

fn clamp_duals(d: &mut RawDuals) {
    d.mu1 = d.mu1.max(0.0);
    d.mu2 = d.mu2.max(0.0);
    for v in d
        .kbar1
        .iter_mut()
        .chain(d.kun1.iter_mut())
        .chain(d.kbar2.iter_mut())
        .chain(d.kun2.iter_mut())
    {
        *v = v.max(0.0);
    }
}

/// Embeds a fixed regression profile into the coordination system: with
/// every θ pinned, the problem separates into independent per-sample
/// anticipative clearings, solved in parallel.
pub fn embed_profile(
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
    profile: &RegressionProfile,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<EquilibriumSolution, EqError> {
    cfg.validate(case)?;
    if profile.n_farm() != case.n_farm() {
        return Err(EqError::DimensionMismatch);
    }
    let started = Instant::now();
    let n = dataset.len() as f64;

    let results: Result<Vec<_>, EqError> = dataset
        .samples
        .par_iter()
        .map(|sample| {
            let forecast = profile.forecast_bus(case, &sample.features);
            let mut actual = vec![0.0; case.n_bus];
            for (j, &bus) in case.wind_bus.iter().enumerate() {
                actual[bus] += sample.wind_mw[j];
            }
            clear_joint(case, &forecast, &actual, backend, settings).map_err(|e| EqError::Embed {
                id: sample.id,
                source: e,
            })
        })
        .collect();
    let results = results?;

    let mut dispatch = Vec::with_capacity(results.len());
    let mut prices = Vec::with_capacity(results.len());
    let mut objective = 0.0;
    let mut kkt = KktResiduals::default();
    let mut min_dual: f64 = 0.0;
    for (i, r) in results.into_iter().enumerate() {
        objective += r.objective / n;
        min_dual = min_dual.min(r.duals.min_value());
        let (lmp_da, lmp_rt) = equilibrium_lmps(&r.duals, &case.ptdf, case.n_bus)
            .map_err(|_| EqError::DimensionMismatch)?;
        prices.push(PriceSystem {
            duals: r.duals,
            lmp_da,
            lmp_rt,
        });
        dispatch.push(r.decision);
        kkt.stationarity = kkt.stationarity.max(r.kkt.stationarity);
        kkt.primal_eq = kkt.primal_eq.max(r.kkt.primal_eq);
        kkt.primal_ineq = kkt.primal_ineq.max(r.kkt.primal_ineq);
        kkt.complementarity = kkt.complementarity.max(r.kkt.complementarity);
        let _ = i;
    }
    // the regression loss is constant under a fixed profile but belongs to
    // the regularized objective
    for (i, sample) in dataset.samples.iter().enumerate() {
        let fc = profile.forecast_mw(case, &sample.features);
        for j in 0..case.n_farm() {
            objective += cfg.gamma[j] * (fc[j] - sample.wind_mw[j]).powi(2) / n;
        }
        let _ = i;
    }

    Ok(EquilibriumSolution {
        theta: profile.clone(),
        dispatch,
        prices,
        objective,
        diagnostics: EquilibriumDiagnostics {
            kkt,
            solve_seconds: started.elapsed().as_secs_f64(),
            min_dual,
            backend: backend.name().to_string(),
        },
    })
}
