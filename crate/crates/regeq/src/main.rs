//! Command-line shell: data generation, market clearing, model fitting,
//! coordinated-profile computation and the full evaluation pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use regeq::admm::{admm_solve, AdmmStop};
use regeq::equilibrium::{solve_equilibrium, GameConfig};
use regeq::eval::oracle_run;
use regeq::features::{fit_baseline, fit_price_taker, FarmSeries, KernelConfig};
use regeq::io::{
    load_case, read_csv_config_hash, run_experiment, synth_wind, write_synth_csv,
    ExperimentConfig, RegimeName,
};
use regeq::market::{clear_day_ahead, clear_real_time, equilibrium_lmps, RawDuals};
use regeq::qp::{ClarabelBackend, SolveSettings};

#[derive(Parser)]
#[command(
    name = "regeq",
    about = "Two-settlement electricity market simulation with coordinated wind-power regression models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic wind dataset CSV.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        /// Farm count of the target case (data is shared across farms).
        #[arg(long, default_value_t = 1)]
        farms: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Clear the day-ahead (and optionally real-time) market once.
    Clear(ClearArgs),
    /// Fit per-farm regression weights on the experiment's training split.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// baseline | price-taker (price-taker trains against the prices of
        /// a perfect-foresight run).
        #[arg(long, default_value = "baseline")]
        method: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the coordinated regression profile.
    Equilibrium {
        #[arg(long)]
        config: PathBuf,
        /// central | admm
        #[arg(long, default_value = "central")]
        method: String,
    },
    /// Run the configured regimes and write metric tables.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's regime list (comma separated).
        #[arg(long)]
        regimes: Option<String>,
    },
    /// Full pipeline: data, fits, coordination, evaluation, reports.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Validate a result bundle: all tables must share one config hash.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct ClearArgs {
    #[arg(long)]
    case: PathBuf,
    /// Per-farm forecast MW as `bus=mw` pairs, e.g. `1=40,2=75`.
    #[arg(long)]
    forecast: String,
    /// Per-farm realization MW; when given, the real-time stage also clears.
    #[arg(long)]
    actual: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
    fn infeasible(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
    fn solver(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { seed, n, farms, out } => {
            if n == 0 || farms == 0 {
                return Err(CliError::config("n and farms must be >= 1"));
            }
            let records = synth_wind(seed, n);
            write_synth_csv(&out, &records)
                .map_err(|e| CliError::solver(format!("cannot write {}: {e}", out.display())))?;
            println!("wrote {} rows to {}", records.len(), out.display());
            Ok(())
        }
        Command::Clear(args) => clear_command(args),
        Command::Fit { config, method, out } => fit_command(&config, &method, &out),
        Command::Equilibrium { config, method } => equilibrium_command(&config, &method),
        Command::Evaluate { config, regimes } => {
            let mut cfg = ExperimentConfig::load(&config)
                .map_err(|e| CliError::config(e.to_string()))?;
            if let Some(list) = regimes {
                cfg.regimes = parse_regimes(&list)?;
            }
            run_pipeline(&cfg)
        }
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)
                .map_err(|e| CliError::config(e.to_string()))?;
            run_pipeline(&cfg)
        }
        Command::Report { dir } => {
            let mut hashes = Vec::new();
            for name in [
                "system_metrics.csv",
                "revenue_metrics.csv",
                "regression_weights.csv",
                "predictions.csv",
            ] {
                let path = dir.join(name);
                if path.exists() {
                    let hash = read_csv_config_hash(&path)
                        .map_err(|e| CliError::config(format!("{name}: {e}")))?;
                    hashes.push((name, hash));
                }
            }
            if hashes.is_empty() {
                return Err(CliError::config("no result tables found"));
            }
            let first = hashes[0].1.clone();
            for (name, hash) in &hashes {
                if *hash != first {
                    return Err(CliError::config(format!(
                        "bundle mixes config hashes: {} has {hash}, expected {first}",
                        name
                    )));
                }
            }
            println!("bundle consistent: config_hash={first} ({} tables)", hashes.len());
            Ok(())
        }
    }
}

fn parse_regimes(list: &str) -> Result<Vec<RegimeName>, CliError> {
    list.split(',')
        .map(|tok| match tok.trim() {
            "oracle" => Ok(RegimeName::Oracle),
            "baseline" => Ok(RegimeName::Baseline),
            "equilibrium-central" => Ok(RegimeName::EquilibriumCentral),
            "equilibrium-admm" => Ok(RegimeName::EquilibriumAdmm),
            other => Err(CliError::config(format!("unknown regime `{other}`"))),
        })
        .collect()
}

fn parse_farm_values(case_farms: &[usize], text: &str) -> Result<Vec<f64>, CliError> {
    let mut out = vec![0.0; case_farms.len()];
    for pair in text.split(',') {
        let (bus, val) = pair
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("expected bus=mw, got `{pair}`")))?;
        let bus: usize = bus
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("bad bus `{bus}`")))?;
        let val: f64 = val
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("bad value `{val}`")))?;
        let j = case_farms
            .iter()
            .position(|&b| b + 1 == bus)
            .ok_or_else(|| CliError::config(format!("no wind farm on bus {bus}")))?;
        out[j] = val;
    }
    Ok(out)
}

fn clear_command(args: ClearArgs) -> Result<(), CliError> {
    let case = load_case(&args.case).map_err(|e| CliError::config(e.to_string()))?;
    let settings = SolveSettings::default();
    let forecast_farm = parse_farm_values(&case.wind_bus, &args.forecast)?;
    let mut forecast = vec![0.0; case.n_bus];
    for (j, &bus) in case.wind_bus.iter().enumerate() {
        forecast[bus] += forecast_farm[j];
    }
    let da = clear_day_ahead(&case, &forecast, &ClarabelBackend, &settings).map_err(|e| {
        match e {
            regeq::market::ClearingError::Infeasible { .. } => CliError::infeasible(e.to_string()),
            other => CliError::solver(other.to_string()),
        }
    })?;

    let mut report = serde_json::json!({
        "case": case.name,
        "day_ahead": {
            "p_mw": da.p,
            "objective": da.objective,
            "mu1": da.mu1,
            "kkt_residual": da.kkt.max(),
        },
    });

    if let Some(actual_text) = &args.actual {
        let actual_farm = parse_farm_values(&case.wind_bus, actual_text)?;
        let mut actual = vec![0.0; case.n_bus];
        for (j, &bus) in case.wind_bus.iter().enumerate() {
            actual[bus] += actual_farm[j];
        }
        let rt = clear_real_time(&case, &da.p, &forecast, &actual, &ClarabelBackend, &settings)
            .map_err(|e| match e {
                regeq::market::ClearingError::Infeasible { .. } => {
                    CliError::infeasible(e.to_string())
                }
                other => CliError::solver(other.to_string()),
            })?;
        let duals = RawDuals {
            mu1: da.mu1,
            mu2: rt.mu2,
            kbar1: da.kbar1.clone(),
            kun1: da.kun1.clone(),
            kbar2: rt.kbar2.clone(),
            kun2: rt.kun2.clone(),
        };
        let (lmp_da, lmp_rt) = equilibrium_lmps(&duals, &case.ptdf, case.n_bus)
            .map_err(|e| CliError::solver(e.to_string()))?;
        report["real_time"] = serde_json::json!({
            "r_up_mw": rt.r_up,
            "r_dn_mw": rt.r_dn,
            "shed_mw": rt.shed,
            "mu2": rt.mu2,
            "incremental_cost": rt.incremental_cost,
        });
        report["lmp_da"] = serde_json::json!(lmp_da);
        report["lmp_rt"] = serde_json::json!(lmp_rt);
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    Ok(())
}

/// Builds the training split plus related handles shared by fit/equilibrium.
fn load_training(
    cfg: &ExperimentConfig,
) -> Result<
    (
        regeq::market::NetworkCase,
        regeq::market::Dataset,
        GameConfig,
        SolveSettings,
    ),
    CliError,
> {
    let case = load_case(&cfg.case).map_err(|e| CliError::config(e.to_string()))?;
    let records = match &cfg.data.path {
        Some(p) => regeq::io::load_records(p).map_err(|e| CliError::config(e.to_string()))?,
        None => synth_wind(
            cfg.data.seed,
            cfg.data.n_pool.unwrap_or(cfg.data.n_train + cfg.data.n_test),
        ),
    };
    let kernels = cfg.kernels.clone().unwrap_or_else(|| {
        let (lo, hi) = records.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, r| {
            (acc.0.min(r.features[2]), acc.1.max(r.features[2]))
        });
        KernelConfig::defaults((lo, hi))
    });
    let (train, _) = regeq::io::split_dataset(
        &records,
        &kernels,
        &case,
        &regeq::io::SplitSpec {
            seed: cfg.data.seed,
            n_train: cfg.data.n_train,
            n_test: cfg.data.n_test,
        },
    )
    .map_err(|e| CliError::config(e.to_string()))?;
    let game = GameConfig {
        gamma: cfg
            .game
            .gamma_per_farm
            .clone()
            .unwrap_or_else(|| vec![cfg.game.gamma; case.n_farm()]),
        tau: cfg
            .game
            .tau_per_farm
            .clone()
            .unwrap_or_else(|| vec![cfg.game.tau; case.n_farm()]),
    };
    let settings = SolveSettings {
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
        warm_start: None,
    };
    Ok((case, train, game, settings))
}

fn fit_command(config: &PathBuf, method: &str, out: &PathBuf) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config).map_err(|e| CliError::config(e.to_string()))?;
    let (case, train, game, settings) = load_training(&cfg)?;

    let prices = if method == "price-taker" {
        let runs = oracle_run(&case, &train, &game.gamma, &ClarabelBackend, &settings)
            .map_err(|(id, e)| CliError::infeasible(format!("sample {id}: {e}")))?;
        Some(runs)
    } else if method == "baseline" {
        None
    } else {
        return Err(CliError::config(format!("unknown fit method `{method}`")));
    };

    let mut lines = vec!["farm,feature,weight".to_string()];
    for j in 0..case.n_farm() {
        let series = FarmSeries {
            phi: train.samples.iter().map(|s| s.features.clone()).collect(),
            power: train
                .samples
                .iter()
                .map(|s| s.wind_mw[j] / case.wind_cap[j])
                .collect(),
            capacity_mw: case.wind_cap[j],
        };
        let theta = match &prices {
            None => fit_baseline(&series, game.tau[j], &ClarabelBackend, &settings)
                .map_err(|e| CliError::solver(e.to_string()))?,
            Some(runs) => {
                let bus = case.wind_bus[j];
                let hist: Vec<(f64, f64)> = runs
                    .iter()
                    .map(|c| (c.prices.lmp_da[bus], c.prices.lmp_rt[bus]))
                    .collect();
                fit_price_taker(
                    &series,
                    &hist,
                    game.gamma[j],
                    game.tau[j],
                    &ClarabelBackend,
                    &settings,
                )
                .map_err(|e| CliError::solver(e.to_string()))?
                .theta
            }
        };
        for (k, w) in theta.iter().enumerate() {
            lines.push(format!("farm_bus{},{k},{w}", case.wind_bus[j] + 1));
        }
    }
    std::fs::write(out, lines.join("\n") + "\n")
        .map_err(|e| CliError::solver(format!("cannot write {}: {e}", out.display())))?;
    println!("wrote weights for {} farms to {}", case.n_farm(), out.display());
    Ok(())
}

fn equilibrium_command(config: &PathBuf, method: &str) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config).map_err(|e| CliError::config(e.to_string()))?;
    let (case, train, game, settings) = load_training(&cfg)?;
    let sol = match method {
        "central" => solve_equilibrium(&case, &train, &game, &ClarabelBackend, &settings)
            .map_err(|e| match &e {
                regeq::equilibrium::EqError::Infeasible { .. } => {
                    CliError::infeasible(e.to_string())
                }
                _ => CliError::solver(e.to_string()),
            })?,
        "admm" => {
            let admm_cfg = cfg.admm.clone().unwrap_or_default();
            let schedule = admm_cfg
                .schedule
                .build(admm_cfg.max_iter)
                .map_err(|e| CliError::config(e.to_string()))?;
            let stop = AdmmStop {
                tol: admm_cfg.tol,
                max_iter: admm_cfg.max_iter,
                window: admm_cfg.window,
            };
            admm_solve(
                &case,
                &train,
                &game,
                &schedule,
                &stop,
                None,
                &ClarabelBackend,
                &settings,
            )
            .map_err(|e| CliError::solver(e.to_string()))?
            .solution
        }
        other => return Err(CliError::config(format!("unknown method `{other}`"))),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "method": method,
            "objective": sol.objective,
            "theta": sol.theta.theta,
            "l1_norms": sol.theta.l1_norms(),
            "solve_seconds": sol.diagnostics.solve_seconds,
        }))
        .expect("json")
    );
    Ok(())
}

fn run_pipeline(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let outcome = run_experiment(cfg).map_err(|e| CliError {
        code: e.exit_code() as u8,
        message: e.to_string(),
    })?;
    println!(
        "wrote result bundle to {} (config_hash={})",
        outcome.output_dir.display(),
        outcome.config_hash
    );
    for row in &outcome.metrics.rows {
        println!(
            "  {:22} {:5}  total {:10.1}  da {:10.1}  rt {:9.1}  rmse {}",
            row.regime,
            row.split,
            row.cost.cost_total,
            row.cost.cost_da,
            row.cost.cost_rt,
            row.rmse_mwh.map_or("-".into(), |v| format!("{v:.1}")),
        );
    }
    Ok(())
}
