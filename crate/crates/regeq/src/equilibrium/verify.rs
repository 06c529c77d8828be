//! No-deviation verification: each farm's best unilateral model change,
//! with all other farms' models held fixed while dispatch and prices
//! re-equilibrate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::market::{Dataset, NetworkCase};
use crate::qp::{QpBackend, SolveSettings};

use super::central::{embed_profile, solve_central_with, EqError, EquilibriumSolution, GameConfig};

/// Average per-farm profit of a solution on its own dataset and prices:
/// (1/n) Σᵢ [λ₁ᵢ ŵᵢⱼ + λ₂ᵢ (wᵢⱼ − ŵᵢⱼ) − γⱼ(ŵᵢⱼ − wᵢⱼ)²], $.
pub fn farm_profits(
    sol: &EquilibriumSolution,
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
) -> Vec<f64> {
    let n = dataset.len() as f64;
    let mut profits = vec![0.0; case.n_farm()];
    for (i, sample) in dataset.samples.iter().enumerate() {
        let fc = sol.theta.forecast_mw(case, &sample.features);
        for j in 0..case.n_farm() {
            let bus = case.wind_bus[j];
            let w = sample.wind_mw[j];
            profits[j] += (sol.prices[i].lmp_da[bus] * fc[j]
                + sol.prices[i].lmp_rt[bus] * (w - fc[j])
                - cfg.gamma[j] * (fc[j] - w) * (fc[j] - w))
                / n;
        }
    }
    profits
}

#[derive(Debug, Clone, Serialize)]
pub struct FarmDeviation {
    /// Profit at the incumbent solution, $.
    pub reference_profit: f64,
    /// Profit of the farm's best response with everyone else fixed, $.
    pub best_response_profit: f64,
    /// best_response_profit − reference_profit.
    pub gain: f64,
    /// Largest gain seen across the random perturbation sweep, $.
    pub sweep_max_gain: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport {
    pub farms: Vec<FarmDeviation>,
}

impl DeviationReport {
    pub fn max_gain(&self) -> f64 {
        self.farms.iter().map(|f| f.gain).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Uniform draw from the ℓ1 ball of radius τ (exponential-magnitude trick).
fn sample_l1_ball<R: Rng>(rng: &mut R, dim: usize, tau: f64) -> Vec<f64> {
    let mut mags: Vec<f64> = (0..dim)
        .map(|_| -(1.0f64 - rng.gen::<f64>()).ln())
        .collect();
    let total: f64 = mags.iter().sum();
    let radius = tau * rng.gen::<f64>().powf(1.0 / dim as f64);
    for v in mags.iter_mut() {
        *v *= radius / total;
        if rng.gen::<bool>() {
            *v = -*v;
        }
    }
    mags
}

/// For every farm: re-solves the coordination problem with the other
/// farms' rows pinned to the incumbent profile and this farm's row free,
/// re-derives prices from the re-solve, and reports the profit gain over
/// the incumbent. Additionally sweeps `trials` random in-ball rows per
/// farm (each embedded with *all* rows fixed) as an independent spot
/// check; infeasible perturbations are skipped since no market supports
/// them.
pub fn verify_equilibrium(
    sol: &EquilibriumSolution,
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
    trials: usize,
    seed: u64,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<DeviationReport, EqError> {
    let reference = farm_profits(sol, case, dataset, cfg);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut farms = Vec::with_capacity(case.n_farm());

    for j in 0..case.n_farm() {
        let mut fixed: Vec<Option<&[f64]>> = sol
            .theta
            .theta
            .iter()
            .map(|row| Some(row.as_slice()))
            .collect();
        fixed[j] = None;
        let br = solve_central_with(case, dataset, cfg, &fixed, backend, settings)?;
        let br_profit = farm_profits(&br, case, dataset, cfg)[j];

        let mut sweep_max_gain = f64::NEG_INFINITY;
        for _ in 0..trials {
            let candidate = sample_l1_ball(&mut rng, dataset.feature_dim, cfg.tau[j]);
            let mut profile = sol.theta.clone();
            profile.theta[j] = candidate;
            match embed_profile(case, dataset, cfg, &profile, backend, settings) {
                Ok(embedded) => {
                    let p = farm_profits(&embedded, case, dataset, cfg)[j];
                    sweep_max_gain = sweep_max_gain.max(p - reference[j]);
                }
                Err(EqError::Embed { .. }) | Err(EqError::Infeasible { .. }) => continue,
                Err(e) => return Err(e),
            }
        }

        farms.push(FarmDeviation {
            reference_profit: reference[j],
            best_response_profit: br_profit,
            gain: br_profit - reference[j],
            sweep_max_gain,
        });
    }
    Ok(DeviationReport { farms })
}
