//! Residual breakdown of RTS clearings at different backend tolerances.

use regeq::eval::oracle_run;
use regeq::features::KernelConfig;
use regeq::io::{load_case, split_dataset, synth_wind, SplitSpec};
use regeq::qp::{ClarabelBackend, SolveSettings};

fn main() {
    let case = load_case("cases/rts24_api.toml").unwrap();
    let records = synth_wind(1, 60);
    let kernels = KernelConfig::defaults((0.0, 32.0));
    let (train, _) = split_dataset(
        &records, &kernels, &case,
        &SplitSpec { seed: 1, n_train: 40, n_test: 20 },
    ).unwrap();
    for tol in [1e-8, 1e-9, 1e-10, 1e-11] {
        let settings = SolveSettings { tol, max_iter: 500, warm_start: None };
        match oracle_run(&case, &train, &[1e-4; 6], &ClarabelBackend, &settings) {
            Ok(runs) => {
                let worst = runs.iter().map(|c| c.max_kkt_residual).fold(0.0, f64::max);
                println!("tol {tol:.0e}: worst kkt {worst:.2e}");
            }
            Err((id, e)) => println!("tol {tol:.0e}: FAILED at {id}: {e}"),
        }
    }
}
