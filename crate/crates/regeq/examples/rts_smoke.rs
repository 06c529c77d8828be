//! Timing smoke run on the bundled 24-bus case.

use regeq::equilibrium::{solve_equilibrium, GameConfig};
use regeq::eval::{oracle_run, run_regime, Regime};
use regeq::features::KernelConfig;
use regeq::io::{load_case, split_dataset, synth_wind, SplitSpec};
use regeq::qp::{ClarabelBackend, SolveSettings};
use std::time::Instant;

fn main() {
    let n_train: usize = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(100);
    let case = load_case("cases/rts24_api.toml").unwrap();
    let records = synth_wind(1, n_train + 200);
    let kernels = KernelConfig::defaults((0.0, 32.0));
    let (train, test) = split_dataset(
        &records, &kernels, &case,
        &SplitSpec { seed: 1, n_train, n_test: 200 },
    ).unwrap();
    let settings = SolveSettings::default();
    let gamma = vec![1e-4; 6];

    let t = Instant::now();
    let oracle = oracle_run(&case, &train, &gamma, &ClarabelBackend, &settings);
    match &oracle {
        Ok(runs) => {
            let avg: f64 = runs.iter().map(|c| c.total_cost()).sum::<f64>() / runs.len() as f64;
            let worst_kkt = runs.iter().map(|c| c.max_kkt_residual).fold(0.0, f64::max);
            println!("oracle n={} ok: avg cost {:.0} worst kkt {:.2e} [{:.1}s]", runs.len(), avg, worst_kkt, t.elapsed().as_secs_f64());
            let congested = runs.iter().filter(|c| {
                c.prices.duals.kbar1.iter().chain(&c.prices.duals.kun1)
                    .chain(&c.prices.duals.kbar2).chain(&c.prices.duals.kun2)
                    .any(|&k| k > 1e-4)
            }).count();
            println!("  congested samples: {congested}/{}", runs.len());
        }
        Err((id, e)) => println!("oracle FAILED at {id}: {e}"),
    }

    let t = Instant::now();
    let cfg = GameConfig::uniform(6, 1e-4, 10.0);
    match solve_equilibrium(&case, &train, &cfg, &ClarabelBackend, &settings) {
        Ok(sol) => {
            println!(
                "central n={n_train} ok: obj {:.0} kkt {:.2e} min_dual {:.1e} [{:.1}s]",
                sol.objective, sol.diagnostics.kkt.max(), sol.diagnostics.min_dual,
                t.elapsed().as_secs_f64()
            );
            let t2 = Instant::now();
            let regime = Regime::Profile { profile: sol.theta.clone(), clip: false };
            match run_regime(&case, &test, &regime, &gamma, &ClarabelBackend, &settings) {
                Ok(runs) => {
                    let avg: f64 = runs.iter().map(|c| c.total_cost()).sum::<f64>() / runs.len() as f64;
                    let rt: f64 = runs.iter().map(|c| c.cost_rt).sum::<f64>() / runs.len() as f64;
                    println!("eq eval on test ok: avg {avg:.0} rt {rt:.0} [{:.1}s]", t2.elapsed().as_secs_f64());
                }
                Err((id, e)) => println!("eq eval FAILED at {id}: {e}"),
            }
        }
        Err(e) => println!("central FAILED: {e}"),
    }
}
