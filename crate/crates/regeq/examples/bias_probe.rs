//! Forecast bias of the coordinated profile without congestion.

use regeq::equilibrium::{solve_equilibrium, GameConfig};
use regeq::features::KernelConfig;
use regeq::io::{load_case, split_dataset, synth_wind, SplitSpec};
use regeq::qp::{ClarabelBackend, SolveSettings};

fn main() {
    let mut case = load_case("cases/rts24_api.toml").unwrap();
    for l in case.line_limit.iter_mut() {
        *l *= 10.0;
    }
    let records = synth_wind(11, 700);
    let kernels = KernelConfig::defaults((0.0, 32.0));
    let (train, _) = split_dataset(
        &records, &kernels, &case,
        &SplitSpec { seed: 11, n_train: 500, n_test: 200 },
    ).unwrap();
    let cfg = GameConfig::uniform(6, 1e-4, 10.0);
    let sol = solve_equilibrium(&case, &train, &cfg, &ClarabelBackend, &SolveSettings::default()).unwrap();
    let mut bias = vec![0.0; 6];
    let mut actual = vec![0.0; 6];
    for (i, s) in train.samples.iter().enumerate() {
        let fc = sol.forecast_mw(&case, &train, i);
        for j in 0..6 {
            bias[j] += (fc[j] - s.wind_mw[j]) / train.len() as f64;
            actual[j] += s.wind_mw[j] / train.len() as f64;
        }
    }
    for j in 0..6 {
        println!("farm at bus {}: mean actual {:7.2} bias {:+7.2}", case.wind_bus[j]+1, actual[j], bias[j]);
    }
    // where does delivered regulation sit on average?
    let mut rup = 0.0;
    let mut rdn = 0.0;
    for d in &sol.dispatch {
        rup += d.r_up.iter().sum::<f64>() / sol.dispatch.len() as f64;
        rdn += d.r_dn.iter().sum::<f64>() / sol.dispatch.len() as f64;
    }
    println!("avg total r_up {rup:.2} r_dn {rdn:.2} objective {:.0}", sol.objective);
}
