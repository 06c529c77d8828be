//! Shared desk-scale fixtures for unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::market::{Dataset, NetworkCase, Sample};

/// Single bus, no lines: gen (c=10, C=1, p ∈ [0,100], c+=100, c−=0.5),
/// load d=50 with prohibitive shedding cost, one 60 MW farm.
pub(crate) fn one_bus_case() -> NetworkCase {
    NetworkCase {
        name: "one-bus".into(),
        n_bus: 1,
        ptdf: vec![],
        line_limit: vec![],
        demand: vec![50.0],
        gen_cost_lin: vec![10.0],
        gen_cost_quad: vec![1.0],
        reg_up_cost: vec![100.0],
        reg_dn_cost: vec![0.5],
        shed_cost_lin: vec![1000.0],
        shed_cost_quad: vec![1.0],
        p_min: vec![0.0],
        p_max: vec![100.0],
        wind_bus: vec![0],
        wind_cap: vec![60.0],
    }
}

/// Three buses in a triangle (equal reactances, PTDF from the reduced
/// B-matrix with slack 0). One generator at bus 0 keeps the regulation
/// merit order trivially consistent, with a narrow c+/c− band so
/// decentralized dual updates have short journeys; loads sit at buses 1
/// and 2, farms at buses 1 and 2.
pub(crate) fn three_bus_case() -> NetworkCase {
    let ptdf = vec![
        vec![0.0, -2.0 / 3.0, -1.0 / 3.0],
        vec![0.0, -1.0 / 3.0, -2.0 / 3.0],
        vec![0.0, 1.0 / 3.0, -1.0 / 3.0],
    ];
    NetworkCase {
        name: "three-bus".into(),
        n_bus: 3,
        ptdf,
        line_limit: vec![150.0, 150.0, 150.0],
        demand: vec![0.0, 120.0, 60.0],
        gen_cost_lin: vec![10.0, 0.0, 0.0],
        gen_cost_quad: vec![0.05, 0.0, 0.0],
        reg_up_cost: vec![13.0, 0.0, 0.0],
        reg_dn_cost: vec![8.0, 0.0, 0.0],
        shed_cost_lin: vec![0.0, 500.0, 500.0],
        shed_cost_quad: vec![0.0, 1.0, 1.0],
        p_min: vec![0.0, 0.0, 0.0],
        p_max: vec![250.0, 0.0, 0.0],
        wind_bus: vec![1, 2],
        wind_cap: vec![60.0, 80.0],
    }
}

/// Synthetic feature/wind draws for the desk cases: features in (0, 1],
/// per-farm wind correlated with the leading features plus noise, clipped
/// to capacity.
pub(crate) fn synthetic_dataset(case: &NetworkCase, n: usize, m: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let b = case.n_farm();
    let samples = (0..n)
        .map(|id| {
            let features: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
            let strength: f64 =
                (0.7 * features[0] + 0.3 * features[m.min(2) - 1]).clamp(0.0, 1.0);
            let wind_mw = (0..b)
                .map(|j| {
                    let noise = rng.gen_range(-0.08..0.08);
                    ((strength + noise).clamp(0.0, 1.0)) * case.wind_cap[j]
                })
                .collect();
            Sample {
                id,
                features,
                wind_mw,
            }
        })
        .collect();
    Dataset {
        feature_dim: m,
        samples,
    }
}
