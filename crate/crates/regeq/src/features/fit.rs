//! Per-farm regression fits over the ℓ1 ball.

use thiserror::Error;

use crate::qp::{
    encode_l1_ball, solve_qp, QpBackend, QpError, QpStatus, QuadraticProgram, SolveSettings,
};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("solver did not reach optimality: {0}")]
    Solver(QpStatus),
    #[error("vector lengths do not match")]
    DimensionMismatch,
    #[error("regression-loss weight must be >= 0, got {0}")]
    NegativeGamma(f64),
    #[error(transparent)]
    Qp(#[from] QpError),
}

/// Training view of a single farm: shared transformed features, its own
/// capacity-normalized power series, and the capacity used to rescale
/// revenue terms to MW.
#[derive(Debug, Clone)]
pub struct FarmSeries {
    pub phi: Vec<Vec<f64>>,
    /// Power as fraction of capacity, one entry per sample.
    pub power: Vec<f64>,
    pub capacity_mw: f64,
}

impl FarmSeries {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.phi.first().map_or(0, |p| p.len())
    }

    fn check(&self) -> Result<(), FitError> {
        if self.phi.len() != self.power.len() || self.phi.is_empty() {
            return Err(FitError::DimensionMismatch);
        }
        let m = self.feature_dim();
        if self.phi.iter().any(|p| p.len() != m) {
            return Err(FitError::DimensionMismatch);
        }
        Ok(())
    }

    /// (1/n) Σ φᵢφᵢᵀ and (1/n) Σ wᵢφᵢ.
    fn moments(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let m = self.feature_dim();
        let n = self.len() as f64;
        let mut gram = vec![vec![0.0; m]; m];
        let mut cross = vec![0.0; m];
        for (phi, &w) in self.phi.iter().zip(&self.power) {
            for a in 0..m {
                cross[a] += w * phi[a] / n;
                for b in a..m {
                    gram[a][b] += phi[a] * phi[b] / n;
                }
            }
        }
        (gram, cross)
    }
}

/// ŵ = θᵀφ, in whatever units θ carries. No clipping.
pub fn predict(theta: &[f64], phi: &[f64]) -> Result<f64, FitError> {
    if theta.len() != phi.len() {
        return Err(FitError::DimensionMismatch);
    }
    Ok(theta.iter().zip(phi).map(|(a, b)| a * b).sum())
}

/// Minimizes the mean squared prediction error over ‖θ‖₁ <= τ.
pub fn fit_baseline(
    series: &FarmSeries,
    tau: f64,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<Vec<f64>, FitError> {
    series.check()?;
    let m = series.feature_dim();
    let (gram, cross) = series.moments();

    let mut qp = QuadraticProgram::new(2 * m);
    for a in 0..m {
        qp.add_quad_cost(a, a, gram[a][a]);
        for b in a + 1..m {
            qp.add_quad_cost(a, b, 2.0 * gram[a][b]);
        }
        qp.add_lin_cost(a, -2.0 * cross[a]);
    }
    encode_l1_ball(&mut qp, &(0..m), &(m..2 * m), tau)?;

    let sol = solve_qp(backend, &qp, settings);
    if !sol.status.is_optimal() {
        return Err(FitError::Solver(sol.status));
    }
    debug_assert!(sol.kkt.max() < 1e-5, "baseline fit residuals {:?}", sol.kkt);
    Ok(sol.x[..m].to_vec())
}

#[derive(Debug, Clone)]
pub struct PriceTakerFit {
    pub theta: Vec<f64>,
    /// Set when γ = 0 left the optimizer non-unique on the ball boundary.
    pub nonunique: bool,
}

/// Maximizes average market revenue minus γ times the prediction loss,
/// holding the per-sample prices (λ₁, λ₂) at the farm's bus fixed:
///
/// ```text
///   max  (1/n) Σ [λ₁ᵢ ŵᵢ + λ₂ᵢ (wᵢ − ŵᵢ)] − γ (1/n) Σ (ŵᵢ − wᵢ)²
///   s.t. ‖θ‖₁ <= τ,     ŵᵢ = capacity · θᵀφᵢ
/// ```
pub fn fit_price_taker(
    series: &FarmSeries,
    prices: &[(f64, f64)],
    gamma: f64,
    tau: f64,
    backend: &dyn QpBackend,
    settings: &SolveSettings,
) -> Result<PriceTakerFit, FitError> {
    series.check()?;
    if prices.len() != series.len() {
        return Err(FitError::DimensionMismatch);
    }
    if gamma < 0.0 {
        return Err(FitError::NegativeGamma(gamma));
    }
    let m = series.feature_dim();
    let n = series.len() as f64;
    let cap = series.capacity_mw;
    let (gram, cross) = series.moments();

    // price spread pulls θ; the γ loss anchors it to the data
    let mut spread = vec![0.0; m];
    for (phi, &(l1, l2)) in series.phi.iter().zip(prices) {
        for a in 0..m {
            spread[a] += (l1 - l2) * phi[a] * cap / n;
        }
    }

    let mut qp = QuadraticProgram::new(2 * m);
    for a in 0..m {
        qp.add_quad_cost(a, a, gamma * cap * cap * gram[a][a]);
        for b in a + 1..m {
            qp.add_quad_cost(a, b, 2.0 * gamma * cap * cap * gram[a][b]);
        }
        qp.add_lin_cost(a, -spread[a] - 2.0 * gamma * cap * cap * cross[a]);
    }
    encode_l1_ball(&mut qp, &(0..m), &(m..2 * m), tau)?;

    let sol = solve_qp(backend, &qp, settings);
    if !sol.status.is_optimal() {
        return Err(FitError::Solver(sol.status));
    }

    let nonunique = if gamma == 0.0 {
        // linear objective over the ℓ1 ball: unique only when one
        // coefficient strictly dominates
        let mut mags: Vec<f64> = spread.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        mags[0] < 1e-12 || (m > 1 && mags[0] - mags[1] < 1e-9 * (1.0 + mags[0]))
    } else {
        false
    };

    Ok(PriceTakerFit {
        theta: sol.x[..m].to_vec(),
        nonunique,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::ClarabelBackend;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn settings() -> SolveSettings {
        SolveSettings::default()
    }

    fn random_series(seed: u64, n: usize, m: usize) -> FarmSeries {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let phi: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let power = phi
            .iter()
            .map(|p| (0.8 * p[0] + 0.1 * p[m - 1] + rng.gen_range(-0.02..0.02)).clamp(0.0, 1.0))
            .collect();
        FarmSeries {
            phi,
            power,
            capacity_mw: 100.0,
        }
    }

    #[test]
    fn predict_is_a_dot_product() {
        assert_eq!(predict(&[0.0, 0.0], &[0.3, 0.9]).unwrap(), 0.0);
        assert_eq!(predict(&[1.0, 2.0], &[0.5, 0.25]).unwrap(), 1.0);
        assert!(predict(&[1.0], &[0.5, 0.25]).is_err());
    }

    #[test]
    fn realizable_target_is_recovered() {
        let mut series = random_series(1, 60, 3);
        series.power = series.phi.iter().map(|p| p[0]).collect();
        let theta = fit_baseline(&series, 10.0, &ClarabelBackend, &settings()).unwrap();
        assert_abs_diff_eq!(theta[0], 1.0, epsilon = 1e-5);
        assert!(theta[1].abs() < 1e-5 && theta[2].abs() < 1e-5);
    }

    #[test]
    fn zero_target_gives_zero_weights() {
        let mut series = random_series(2, 40, 3);
        series.power = vec![0.0; 40];
        let theta = fit_baseline(&series, 10.0, &ClarabelBackend, &settings()).unwrap();
        assert!(theta.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn radius_clamps_scalar_fit_to_boundary() {
        // w = 2φ forces the unconstrained optimum to 2; τ = 0.5 projects it
        let phi: Vec<Vec<f64>> = (1..=20).map(|k| vec![k as f64 / 20.0]).collect();
        let power: Vec<f64> = phi.iter().map(|p| 2.0 * p[0]).collect();
        let series = FarmSeries {
            phi,
            power,
            capacity_mw: 50.0,
        };
        let theta = fit_baseline(&series, 0.5, &ClarabelBackend, &settings()).unwrap();
        assert_abs_diff_eq!(theta[0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn baseline_loss_is_nonincreasing_in_radius() {
        let series = random_series(3, 80, 4);
        let loss = |theta: &[f64]| -> f64 {
            series
                .phi
                .iter()
                .zip(&series.power)
                .map(|(p, w)| (predict(theta, p).unwrap() - w).powi(2))
                .sum::<f64>()
                / series.len() as f64
        };
        let mut prev = f64::INFINITY;
        for tau in [0.1, 0.3, 0.7, 1.5, 5.0] {
            let theta = fit_baseline(&series, tau, &ClarabelBackend, &settings()).unwrap();
            let l = loss(&theta);
            assert!(l <= prev + 1e-9, "loss rose from {prev} to {l} at τ={tau}");
            prev = l;
        }
    }

    #[test]
    fn equal_prices_reduce_to_baseline() {
        let series = random_series(4, 60, 3);
        let prices = vec![(35.0, 35.0); series.len()];
        let fit =
            fit_price_taker(&series, &prices, 1e-4, 10.0, &ClarabelBackend, &settings()).unwrap();
        let base = fit_baseline(&series, 10.0, &ClarabelBackend, &settings()).unwrap();
        for (a, b) in fit.theta.iter().zip(&base) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-4);
        }
    }

    #[test]
    fn pure_revenue_fit_lands_on_ball_vertex() {
        // λ₁ > λ₂ everywhere and γ = 0: the linear objective pushes θ to
        // τ·e_k on the dominant coefficient
        let series = random_series(5, 50, 3);
        let prices = vec![(60.0, 20.0); series.len()];
        let tau = 2.0;
        let fit =
            fit_price_taker(&series, &prices, 0.0, tau, &ClarabelBackend, &settings()).unwrap();
        assert!(!fit.nonunique);
        let mut g = vec![0.0; 3];
        for phi in &series.phi {
            for a in 0..3 {
                g[a] += phi[a];
            }
        }
        let kmax = (0..3).max_by(|&a, &b| g[a].partial_cmp(&g[b]).unwrap()).unwrap();
        assert_abs_diff_eq!(fit.theta[kmax], tau, epsilon = 1e-5);
        let norm: f64 = fit.theta.iter().map(|v| v.abs()).sum();
        assert_abs_diff_eq!(norm, tau, epsilon = 1e-5);
    }

    #[test]
    fn huge_gamma_converges_to_baseline() {
        let series = random_series(6, 60, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let prices: Vec<(f64, f64)> = (0..series.len())
            .map(|_| (rng.gen_range(20.0..70.0), rng.gen_range(10.0..90.0)))
            .collect();
        let fit =
            fit_price_taker(&series, &prices, 1e6, 10.0, &ClarabelBackend, &settings()).unwrap();
        let base = fit_baseline(&series, 10.0, &ClarabelBackend, &settings()).unwrap();
        let dist = fit
            .theta
            .iter()
            .zip(&base)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(dist <= 1e-3, "distance to baseline {dist}");
    }

    #[test]
    fn fitted_weights_respect_the_ball() {
        for seed in 0..6u64 {
            let series = random_series(seed + 10, 50, 4);
            for tau in [0.2, 1.0, 3.0] {
                let theta = fit_baseline(&series, tau, &ClarabelBackend, &settings()).unwrap();
                let norm: f64 = theta.iter().map(|v| v.abs()).sum();
                assert!(norm <= tau + 1e-8, "‖θ‖₁ = {norm} > τ = {tau}");
            }
        }
    }
}
