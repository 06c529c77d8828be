//! Scalar potential of the coordination game and its gradient, stacked in
//! the players' variable order. The gradient stacks each participant's
//! price-free marginal terms; because its Jacobian is symmetric PSD, the
//! shared-constraint game reduces to minimizing this potential over the
//! joint feasible set.

use crate::market::{Dataset, DispatchDecision, NetworkCase};

use super::GameConfig;

/// A joint strategy point (Θ, G, L). Dispatch vectors are bus-indexed.
#[derive(Debug, Clone)]
pub struct PlayerPoint {
    /// Per-farm regression rows, capacity-normalized units.
    pub theta: Vec<Vec<f64>>,
    pub dispatch: Vec<DispatchDecision>,
}

impl PlayerPoint {
    /// Stacked layout: θ₁..θ_b, then per sample (p, r+, r−), then per
    /// sample ℓ. Must match [`gradient_map`].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for row in &self.theta {
            v.extend_from_slice(row);
        }
        for d in &self.dispatch {
            v.extend_from_slice(&d.p);
            v.extend_from_slice(&d.r_up);
            v.extend_from_slice(&d.r_dn);
        }
        for d in &self.dispatch {
            v.extend_from_slice(&d.shed);
        }
        v
    }

    pub fn from_vec(v: &[f64], b: usize, m: usize, n: usize, n_bus: usize) -> Self {
        let mut theta = Vec::with_capacity(b);
        let mut at = 0;
        for _ in 0..b {
            theta.push(v[at..at + m].to_vec());
            at += m;
        }
        let mut dispatch = vec![DispatchDecision::zeros(n_bus); n];
        for d in dispatch.iter_mut() {
            d.p = v[at..at + n_bus].to_vec();
            at += n_bus;
            d.r_up = v[at..at + n_bus].to_vec();
            at += n_bus;
            d.r_dn = v[at..at + n_bus].to_vec();
            at += n_bus;
        }
        for d in dispatch.iter_mut() {
            d.shed = v[at..at + n_bus].to_vec();
            at += n_bus;
        }
        debug_assert_eq!(at, v.len());
        Self { theta, dispatch }
    }

    pub fn dim(b: usize, m: usize, n: usize, n_bus: usize) -> usize {
        b * m + n * 4 * n_bus
    }
}

/// Potential value
///
/// ```text
/// f = (1/n) Σᵢ [ ‖Θφᵢ − wᵢ‖²_Γ + wᵢᵀΓwᵢ + ‖pᵢ+rᵢ⁺−rᵢ⁻‖²_C + cᵀpᵢ
///                + c⁺ᵀrᵢ⁺ − c⁻ᵀrᵢ⁻ + ‖ℓᵢ‖²_S + sᵀℓᵢ ]
/// ```
///
/// which exceeds the coordination objective by exactly the constant
/// (1/n) Σ wᵢᵀΓwᵢ.
pub fn potential_value(
    point: &PlayerPoint,
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
) -> f64 {
    let n = dataset.len() as f64;
    let mut f = 0.0;
    for (i, sample) in dataset.samples.iter().enumerate() {
        for j in 0..case.n_farm() {
            let fc = case.wind_cap[j]
                * point.theta[j]
                    .iter()
                    .zip(&sample.features)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            let w = sample.wind_mw[j];
            f += cfg.gamma[j] * ((fc - w) * (fc - w) + w * w) / n;
        }
        let d = &point.dispatch[i];
        for bus in 0..case.n_bus {
            let u = d.p[bus] + d.r_up[bus] - d.r_dn[bus];
            f += (case.gen_cost_quad[bus] * u * u
                + case.gen_cost_lin[bus] * d.p[bus]
                + case.reg_up_cost[bus] * d.r_up[bus]
                - case.reg_dn_cost[bus] * d.r_dn[bus]
                + case.shed_cost_quad[bus] * d.shed[bus] * d.shed[bus]
                + case.shed_cost_lin[bus] * d.shed[bus])
                / n;
        }
    }
    f
}

/// Stacked player map F(Θ, G, L): the gradient of [`potential_value`]
/// w.r.t. the [`PlayerPoint::to_vec`] layout (negated profit gradients,
/// price terms excluded).
pub fn gradient_map(
    point: &PlayerPoint,
    case: &NetworkCase,
    dataset: &Dataset,
    cfg: &GameConfig,
) -> Vec<f64> {
    let n = dataset.len() as f64;
    let b = case.n_farm();
    let m = dataset.feature_dim;
    let mut grad = Vec::with_capacity(PlayerPoint::dim(b, m, dataset.len(), case.n_bus));

    for j in 0..b {
        let cap = case.wind_cap[j];
        let mut row = vec![0.0; m];
        for sample in &dataset.samples {
            let fc = cap
                * point.theta[j]
                    .iter()
                    .zip(&sample.features)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            let coeff = 2.0 * cfg.gamma[j] * (fc - sample.wind_mw[j]) * cap / n;
            for (k, &phi) in sample.features.iter().enumerate() {
                row[k] += coeff * phi;
            }
        }
        grad.extend_from_slice(&row);
    }

    for d in &point.dispatch {
        for bus in 0..case.n_bus {
            let u = d.p[bus] + d.r_up[bus] - d.r_dn[bus];
            grad.push((case.gen_cost_lin[bus] + 2.0 * case.gen_cost_quad[bus] * u) / n);
        }
        for bus in 0..case.n_bus {
            let u = d.p[bus] + d.r_up[bus] - d.r_dn[bus];
            grad.push((case.reg_up_cost[bus] + 2.0 * case.gen_cost_quad[bus] * u) / n);
        }
        for bus in 0..case.n_bus {
            let u = d.p[bus] + d.r_up[bus] - d.r_dn[bus];
            grad.push((-case.reg_dn_cost[bus] - 2.0 * case.gen_cost_quad[bus] * u) / n);
        }
    }
    for d in &point.dispatch {
        for bus in 0..case.n_bus {
            grad.push((case.shed_cost_lin[bus] + 2.0 * case.shed_cost_quad[bus] * d.shed[bus]) / n);
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Sample;
    use approx::assert_abs_diff_eq;

    fn zero_case() -> NetworkCase {
        NetworkCase {
            name: "potential-test".into(),
            n_bus: 1,
            ptdf: vec![],
            line_limit: vec![],
            demand: vec![1.0],
            gen_cost_lin: vec![0.0],
            gen_cost_quad: vec![1.0],
            reg_up_cost: vec![1.0],
            reg_dn_cost: vec![-1.0],
            shed_cost_lin: vec![0.0],
            shed_cost_quad: vec![1.0],
            p_min: vec![0.0],
            p_max: vec![1.0],
            wind_bus: vec![0],
            wind_cap: vec![1.0],
        }
    }

    #[test]
    fn zero_point_zero_data_vanishes() {
        let mut case = zero_case();
        case.gen_cost_lin = vec![0.0];
        case.reg_up_cost = vec![0.0];
        case.reg_dn_cost = vec![0.0];
        let dataset = Dataset {
            feature_dim: 1,
            samples: vec![Sample {
                id: 0,
                features: vec![1.0],
                wind_mw: vec![0.0],
            }],
        };
        let cfg = GameConfig::uniform(1, 1.0, 1.0);
        let point = PlayerPoint {
            theta: vec![vec![0.0]],
            dispatch: vec![DispatchDecision::zeros(1)],
        };
        assert_eq!(potential_value(&point, &case, &dataset, &cfg), 0.0);
        assert!(gradient_map(&point, &case, &dataset, &cfg)
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn hand_evaluated_single_sample() {
        // n=1, Γ=1, Θφ=0, w=1, all dispatch zero → f = (0−1)² + 1 = 2
        let case = zero_case();
        let dataset = Dataset {
            feature_dim: 1,
            samples: vec![Sample {
                id: 0,
                features: vec![1.0],
                wind_mw: vec![1.0],
            }],
        };
        let cfg = GameConfig::uniform(1, 1.0, 1.0);
        let mut case2 = case.clone();
        case2.gen_cost_lin = vec![0.0];
        case2.reg_up_cost = vec![0.0];
        case2.reg_dn_cost = vec![0.0];
        let point = PlayerPoint {
            theta: vec![vec![0.0]],
            dispatch: vec![DispatchDecision::zeros(1)],
        };
        assert_abs_diff_eq!(potential_value(&point, &case2, &dataset, &cfg), 2.0);
    }

    #[test]
    fn round_trip_layout() {
        let point = PlayerPoint {
            theta: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            dispatch: vec![
                DispatchDecision {
                    p: vec![1.0, 0.0],
                    r_up: vec![0.5, 0.0],
                    r_dn: vec![0.0, 0.25],
                    shed: vec![0.0, 0.125],
                },
                DispatchDecision::zeros(2),
            ],
        };
        let v = point.to_vec();
        assert_eq!(v.len(), PlayerPoint::dim(2, 2, 2, 2));
        let back = PlayerPoint::from_vec(&v, 2, 2, 2, 2);
        assert_eq!(back.to_vec(), v);
    }
}
