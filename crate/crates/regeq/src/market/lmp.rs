//! Locational marginal prices composed from raw constraint multipliers.

use thiserror::Error;

use super::RawDuals;

#[derive(Debug, Error)]
#[error("dual vectors do not match the PTDF dimensions")]
pub struct LmpDimensionError;

/// Composes per-bus prices from the balance and flow duals:
///
/// ```text
///   λ₁ = μ₁·1 − Fᵀ(κ̄₁ − κ̲₁ + κ̄₂ − κ̲₂)
///   λ₂ = μ₂·1 − Fᵀ(κ̄₂ − κ̲₂)
/// ```
///
/// The real-time congestion duals fold back into the day-ahead price
/// because the real-time flow limits constrain the day-ahead injections as
/// well. An exact linear map; callers guarantee nonnegative duals.
pub fn equilibrium_lmps(
    duals: &RawDuals,
    ptdf: &[Vec<f64>],
    n_bus: usize,
) -> Result<(Vec<f64>, Vec<f64>), LmpDimensionError> {
    let nl = ptdf.len();
    if duals.kbar1.len() != nl
        || duals.kun1.len() != nl
        || duals.kbar2.len() != nl
        || duals.kun2.len() != nl
    {
        return Err(LmpDimensionError);
    }
    if ptdf.iter().any(|row| row.len() != n_bus) {
        return Err(LmpDimensionError);
    }

    let mut lmp_da = vec![duals.mu1; n_bus];
    let mut lmp_rt = vec![duals.mu2; n_bus];
    for l in 0..nl {
        let rt_net = duals.kbar2[l] - duals.kun2[l];
        let da_net = duals.kbar1[l] - duals.kun1[l] + rt_net;
        for b in 0..n_bus {
            lmp_da[b] -= ptdf[l][b] * da_net;
            lmp_rt[b] -= ptdf[l][b] * rt_net;
        }
    }
    Ok((lmp_da, lmp_rt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn uncongested_network_prices_are_uniform() {
        let duals = RawDuals {
            mu1: 25.0,
            mu2: 31.5,
            ..RawDuals::zeros(2)
        };
        let ptdf = vec![vec![0.3, -0.2, 0.0], vec![0.1, 0.4, -0.5]];
        let (da, rt) = equilibrium_lmps(&duals, &ptdf, 3).unwrap();
        assert_eq!(da, vec![25.0; 3]);
        assert_eq!(rt, vec![31.5; 3]);
    }

    #[test]
    fn single_congested_line_shifts_both_prices() {
        // μ₁ = 0, one line with κ̄₂ = 1, F entry 0.5 at bus k.
        let mut duals = RawDuals::zeros(1);
        duals.kbar2[0] = 1.0;
        let ptdf = vec![vec![0.0, 0.5]];
        let (da, rt) = equilibrium_lmps(&duals, &ptdf, 2).unwrap();
        assert_abs_diff_eq!(da[1], -0.5);
        assert_abs_diff_eq!(rt[1], -0.5);
        assert_abs_diff_eq!(da[0], 0.0);
    }

    #[test]
    fn randomized_duals_match_dense_matrix_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (nl, nb) = (4, 6);
        let ptdf: Vec<Vec<f64>> = (0..nl)
            .map(|_| (0..nb).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let rand_vec = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            (0..nl).map(|_| rng.gen_range(0.0..5.0)).collect()
        };
        let duals = RawDuals {
            mu1: rng.gen_range(0.0..50.0),
            mu2: rng.gen_range(0.0..50.0),
            kbar1: rand_vec(&mut rng),
            kun1: rand_vec(&mut rng),
            kbar2: rand_vec(&mut rng),
            kun2: rand_vec(&mut rng),
        };
        let (da, rt) = equilibrium_lmps(&duals, &ptdf, nb).unwrap();

        // independent dense recomputation, bus by bus
        for b in 0..nb {
            let mut da_expect = duals.mu1;
            let mut rt_expect = duals.mu2;
            for l in 0..nl {
                da_expect -= ptdf[l][b]
                    * (duals.kbar1[l] - duals.kun1[l] + duals.kbar2[l] - duals.kun2[l]);
                rt_expect -= ptdf[l][b] * (duals.kbar2[l] - duals.kun2[l]);
            }
            assert_abs_diff_eq!(da[b], da_expect, epsilon = 1e-12);
            assert_abs_diff_eq!(rt[b], rt_expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let duals = RawDuals::zeros(2);
        let ptdf = vec![vec![0.1, 0.2]];
        assert!(equilibrium_lmps(&duals, &ptdf, 2).is_err());
    }
}
