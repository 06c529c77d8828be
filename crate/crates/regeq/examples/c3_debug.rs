use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use regeq::equilibrium::{solve_equilibrium, GameConfig};
use regeq::io::load_case;
use regeq::market::{Dataset, NetworkCase, Sample};
use regeq::qp::{ClarabelBackend, DenseIpmBackend, SolveSettings};

fn one_bus_two_stage_cost(case: &NetworkCase, forecast: f64, actual: f64) -> f64 {
    let (c, cq) = (case.gen_cost_lin[0], case.gen_cost_quad[0]);
    let (cu, cd) = (case.reg_up_cost[0], case.reg_dn_cost[0]);
    let d = case.demand[0];
    let p = d - forecast;
    let shortfall = forecast - actual;
    let (r_up, r_dn) = if shortfall > 0.0 { (shortfall, 0.0) } else { (0.0, -shortfall) };
    let u = p + r_up - r_dn;
    c * p + cq * u * u + cu * r_up - cd * r_dn
}

fn main() {
    let case = load_case("cases/tutorial_1bus.toml").unwrap();
    let n = 20;
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let samples: Vec<Sample> = (0..n)
        .map(|id| {
            let phi: f64 = rng.gen_range(0.3..1.0);
            let w = (0.55 * phi + rng.gen_range(-0.06..0.06)).clamp(0.0, 1.0) * case.wind_cap[0];
            Sample { id, features: vec![phi], wind_mw: vec![w] }
        })
        .collect();
    let dataset = Dataset { feature_dim: 1, samples };
    let gamma = 1e-3;
    let cfg = GameConfig::uniform(1, gamma, 1.0);
    let objective = |theta: f64| -> f64 {
        dataset.samples.iter().map(|s| {
            let fc = case.wind_cap[0] * theta * s.features[0];
            one_bus_two_stage_cost(&case, fc, s.wind_mw[0]) + gamma * (fc - s.wind_mw[0]).powi(2)
        }).sum::<f64>() / n as f64
    };
    for (name, backend) in [("clarabel", &ClarabelBackend as &dyn regeq::qp::QpBackend), ("dense", &DenseIpmBackend)] {
        let sol = solve_equilibrium(&case, &dataset, &cfg, backend, &SolveSettings::default()).unwrap();
        let t = sol.theta.theta[0][0];
        println!("{name}: theta* {t:.6} obj_central {:.8} f_oracle(theta*) {:.8} diff {:.3e}",
            sol.objective, objective(t), (sol.objective - objective(t)).abs());
        // per-sample dispatch vs closed form at theta*
        for (i, s) in dataset.samples.iter().enumerate().take(4) {
            let fc = case.wind_cap[0] * t * s.features[0];
            let d = &sol.dispatch[i];
            println!("  s{i}: fc {fc:7.3} w {:7.3} | p {:7.3} (cf {:7.3}) r+ {:6.3} r- {:6.3} shed {:8.5}",
                s.wind_mw[0], d.p[0], case.demand[0]-fc, d.r_up[0], d.r_dn[0], d.shed[0]);
        }
    }
}
