//! Experiment orchestration: regime runs, metric tables, trace files and
//! the run manifest. Every table carries the config hash; re-running the
//! same config and seed reproduces the tables byte for byte.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::admm::{admm_solve, AdmmError, AdmmStop, TraceRow};
use crate::equilibrium::{
    embed_profile, solve_equilibrium, verify_equilibrium, EqError, GameConfig,
};
use crate::eval::{
    competitive_ratio, dispatch_cost_report, forecast_rmse, run_regime, settle_clearings,
    CostReport, EvalError, MetricsReport, Regime, RegimeMetrics, SampleClearing,
};
use crate::features::{fit_baseline, FarmSeries, FitError, KernelConfig, RawRecord};
use crate::market::{ClearingError, Dataset, NetworkCase, RegressionProfile};
use crate::qp::{ClarabelBackend, SolveSettings};

use super::case_file::{load_case, CaseFileError};
use super::config::{ExperimentConfig, RegimeName};
use super::dataset_file::{load_records, split_dataset, DatasetError, SplitSpec};
use super::synth::synth_wind;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Case(#[from] CaseFileError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Config(#[from] super::config::IoConfigError),
    #[error("sample {0} infeasible: {1}")]
    Infeasible(usize, ClearingError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Equilibrium(#[from] EqError),
    #[error(transparent)]
    Admm(#[from] AdmmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("cannot write results: {0}")]
    Write(#[from] std::io::Error),
}

impl ExperimentError {
    /// Process exit code contract: 2 config, 3 infeasible, 4 solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Case(_) | ExperimentError::Dataset(_) | ExperimentError::Config(_) => 2,
            ExperimentError::Infeasible(..) => 3,
            ExperimentError::Equilibrium(EqError::Infeasible { .. }) => 3,
            _ => 4,
        }
    }
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub config_hash: String,
    pub metrics: MetricsReport,
    pub output_dir: PathBuf,
}

/// Identifies the experiment by its inputs: the resolved configuration
/// with location-only fields blanked, plus the raw bytes of the case file
/// and (when given) the dataset file. Where results are written does not
/// change the hash.
pub fn config_hash(config: &ExperimentConfig) -> Result<String, std::io::Error> {
    let mut reduced = config.clone();
    reduced.output_dir = PathBuf::new();
    reduced.case = PathBuf::new();
    let data_path = reduced.data.path.take();
    let mut hasher = Sha256::new();
    hasher.update(reduced.canonical_toml().as_bytes());
    hasher.update(std::fs::read(&config.case)?);
    if let Some(p) = data_path {
        hasher.update(std::fs::read(p)?);
    }
    Ok(hex::encode(hasher.finalize())[..16].to_string())
}

struct RegimeRun {
    name: RegimeName,
    profile: Option<RegressionProfile>,
    train: Vec<SampleClearing>,
    test: Vec<SampleClearing>,
    trace: Option<Vec<TraceRow>>,
    deviation: Option<(Vec<f64>, Vec<f64>)>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    let hash = config_hash(config)?;
    let case = load_case(&config.case)?;
    let backend = ClarabelBackend;
    let settings = SolveSettings {
        tol: config.solver.tol,
        max_iter: config.solver.max_iter,
        warm_start: None,
    };

    let t_start = Instant::now();
    let records: Vec<RawRecord> = match &config.data.path {
        Some(p) => load_records(p)?,
        None => {
            let pool = config
                .data
                .n_pool
                .unwrap_or(config.data.n_train + config.data.n_test);
            synth_wind(config.data.seed, pool)
        }
    };
    let kernels = config.kernels.clone().unwrap_or_else(|| {
        let (lo, hi) = records.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, r| {
            (acc.0.min(r.features[2]), acc.1.max(r.features[2]))
        });
        KernelConfig::defaults((lo, hi))
    });
    let (train, test) = split_dataset(
        &records,
        &kernels,
        &case,
        &SplitSpec {
            seed: config.data.seed,
            n_train: config.data.n_train,
            n_test: config.data.n_test,
        },
    )?;
    let game = GameConfig {
        gamma: config
            .game
            .gamma_per_farm
            .clone()
            .unwrap_or_else(|| vec![config.game.gamma; case.n_farm()]),
        tau: config
            .game
            .tau_per_farm
            .clone()
            .unwrap_or_else(|| vec![config.game.tau; case.n_farm()]),
    };
    let data_seconds = t_start.elapsed().as_secs_f64();

    let mut stage_seconds: Vec<(String, f64)> = vec![("data".into(), data_seconds)];
    let mut runs: Vec<RegimeRun> = Vec::new();

    for &name in &config.regimes {
        let t = Instant::now();
        let (profile, trace): (Option<RegressionProfile>, Option<Vec<TraceRow>>) = match name {
            RegimeName::Oracle => (None, None),
            RegimeName::Baseline => {
                let mut rows = Vec::with_capacity(case.n_farm());
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
                    rows.push(fit_baseline(&series, game.tau[j], &backend, &settings)?);
                }
                (Some(RegressionProfile { theta: rows }), None)
            }
            RegimeName::EquilibriumCentral => {
                let sol = solve_equilibrium(&case, &train, &game, &backend, &settings)?;
                (Some(sol.theta), None)
            }
            RegimeName::EquilibriumAdmm => {
                let admm_cfg = config.admm.clone().unwrap_or_default();
                let schedule = admm_cfg.schedule.build(admm_cfg.max_iter)?;
                let stop = AdmmStop {
                    tol: admm_cfg.tol,
                    max_iter: admm_cfg.max_iter,
                    window: admm_cfg.window,
                };
                let out = admm_solve(
                    &case, &train, &game, &schedule, &stop, None, &backend, &settings,
                )?;
                (Some(out.solution.theta), Some(out.trace))
            }
        };

        let regime = match &profile {
            None => Regime::Oracle,
            Some(p) => Regime::Profile {
                profile: p.clone(),
                clip: config.eval.clip_forecasts,
            },
        };
        let train_runs = run_regime(&case, &train, &regime, &game.gamma, &backend, &settings)
            .map_err(|(id, e)| ExperimentError::Infeasible(id, e))?;
        let test_runs = run_regime(&case, &test, &regime, &game.gamma, &backend, &settings)
            .map_err(|(id, e)| ExperimentError::Infeasible(id, e))?;

        let deviation = match (&profile, config.eval.deviation_incentives) {
            (Some(p), true) => {
                let mut gains = Vec::new();
                for (split, dataset) in [(&train, 0), (&test, 1)].map(|(d, i)| (d, i)) {
                    let _ = dataset;
                    let embedded = embed_profile(&case, split, &game, p, &backend, &settings)?;
                    let report = verify_equilibrium(
                        &embedded, &case, split, &game, 0, config.data.seed, &backend, &settings,
                    )?;
                    gains.push(report.farms.iter().map(|f| f.gain).collect::<Vec<f64>>());
                }
                Some((gains[0].clone(), gains[1].clone()))
            }
            _ => None,
        };

        stage_seconds.push((name.to_string(), t.elapsed().as_secs_f64()));
        runs.push(RegimeRun {
            name,
            profile,
            train: train_runs,
            test: test_runs,
            trace,
            deviation,
        });
    }

    // metric rows against the oracle run when present
    let oracle = runs.iter().find(|r| matches!(r.name, RegimeName::Oracle));
    let mut metrics = MetricsReport::default();
    for run in &runs {
        for (split_name, clearings, dataset) in
            [("train", &run.train, &train), ("test", &run.test, &test)]
        {
            let cost = match oracle {
                Some(o) => dispatch_cost_report(
                    clearings,
                    if split_name == "train" { &o.train } else { &o.test },
                )?,
                None => CostReport {
                    cost_total: mean_total(clearings),
                    cost_da: mean(clearings, |c| c.cost_da),
                    cost_rt: mean(clearings, |c| c.cost_rt),
                    cost_err_avg: f64::NAN,
                    cost_err_signed: f64::NAN,
                    cost_err_cvar10: f64::NAN,
                },
            };
            let (farm_rev, gen_rev, demand) = settle_clearings(clearings, case.n_farm());
            let farm_cr = oracle.map(|o| {
                let (orev, _, _) = settle_clearings(
                    if split_name == "train" { &o.train } else { &o.test },
                    case.n_farm(),
                );
                farm_rev
                    .iter()
                    .zip(&orev)
                    .map(|(r, o)| competitive_ratio(*r, *o).unwrap_or(f64::NAN))
                    .collect::<Vec<f64>>()
            });
            let gen_cr = oracle.and_then(|o| {
                let (_, ogen, _) = settle_clearings(
                    if split_name == "train" { &o.train } else { &o.test },
                    case.n_farm(),
                );
                competitive_ratio(gen_rev, ogen).ok()
            });
            metrics.rows.push(RegimeMetrics {
                regime: run.name.to_string(),
                split: split_name.into(),
                rmse_mwh: run
                    .profile
                    .as_ref()
                    .map(|p| forecast_rmse(p, &case, dataset)),
                cost,
                farm_revenue: farm_rev,
                farm_cr,
                farm_deviation: run.deviation.as_ref().map(|(tr, te)| {
                    if split_name == "train" { tr.clone() } else { te.clone() }
                }),
                gen_revenue: gen_rev,
                gen_cr,
                demand_charge: demand,
            });
        }
    }

    write_outputs(config, &hash, &case, &records, &train, &test, &runs, &metrics, &stage_seconds)?;

    Ok(ExperimentOutcome {
        config_hash: hash,
        metrics,
        output_dir: config.output_dir.clone(),
    })
}

fn mean(clearings: &[SampleClearing], f: impl Fn(&SampleClearing) -> f64) -> f64 {
    clearings.iter().map(f).sum::<f64>() / clearings.len() as f64
}

fn mean_total(clearings: &[SampleClearing]) -> f64 {
    mean(clearings, |c| c.total_cost())
}

/// Atomic write: temp file in the target directory, then rename.
fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(tmp, path)
}

#[allow(clippy::too_many_arguments)]
fn write_outputs(
    config: &ExperimentConfig,
    hash: &str,
    case: &NetworkCase,
    records: &[RawRecord],
    train: &Dataset,
    test: &Dataset,
    runs: &[RegimeRun],
    metrics: &MetricsReport,
    stage_seconds: &[(String, f64)],
) -> Result<(), ExperimentError> {
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    let header = |name: &str| format!("# config_hash={hash}\n# table={name}\n");

    // Table-II-style system metrics
    let mut sys = header("system_metrics");
    sys.push_str(
        "regime,split,rmse_mwh,cost_total,cost_da,cost_rt,cost_err_avg,cost_err_signed,cost_err_cvar10\n",
    );
    for row in &metrics.rows {
        sys.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.regime,
            row.split,
            row.rmse_mwh.map_or("".into(), fmt),
            fmt(row.cost.cost_total),
            fmt(row.cost.cost_da),
            fmt(row.cost.cost_rt),
            fmt(row.cost.cost_err_avg),
            fmt(row.cost.cost_err_signed),
            fmt(row.cost.cost_err_cvar10),
        ));
    }
    write_atomic(&dir.join("system_metrics.csv"), &sys)?;

    // Table-I-style revenues
    let mut rev = header("revenue_metrics");
    rev.push_str("regime,split,entity,revenue,cr_pct,deviation_gain\n");
    for row in &metrics.rows {
        for j in 0..case.n_farm() {
            rev.push_str(&format!(
                "{},{},farm_bus{},{},{},{}\n",
                row.regime,
                row.split,
                case.wind_bus[j] + 1,
                fmt(row.farm_revenue[j]),
                row.farm_cr.as_ref().map_or("".into(), |v| fmt(v[j])),
                row.farm_deviation.as_ref().map_or("".into(), |v| fmt(v[j])),
            ));
        }
        rev.push_str(&format!(
            "{},{},generators,{},{},\n",
            row.regime,
            row.split,
            fmt(row.gen_revenue),
            row.gen_cr.map_or("".into(), fmt),
        ));
        rev.push_str(&format!(
            "{},{},demand,{},,\n",
            row.regime,
            row.split,
            fmt(row.demand_charge),
        ));
    }
    write_atomic(&dir.join("revenue_metrics.csv"), &rev)?;

    // regression weights per profile regime
    let mut weights = header("regression_weights");
    weights.push_str("regime,farm,feature,weight\n");
    for run in runs {
        if let Some(p) = &run.profile {
            for (j, row) in p.theta.iter().enumerate() {
                for (k, w) in row.iter().enumerate() {
                    weights.push_str(&format!(
                        "{},farm_bus{},{},{}\n",
                        run.name,
                        case.wind_bus[j] + 1,
                        k,
                        fmt(*w)
                    ));
                }
            }
        }
    }
    write_atomic(&dir.join("regression_weights.csv"), &weights)?;

    // prediction curves: actual and per-regime forecast vs wind speed
    let mut pred = header("predictions");
    pred.push_str("split,sample_id,wind_speed,farm,actual_mw,regime,forecast_mw\n");
    for (split_name, dataset) in [("train", train), ("test", test)] {
        for sample in &dataset.samples {
            let speed = records[sample.id].features[0];
            for run in runs {
                if let Some(p) = &run.profile {
                    let fc = p.forecast_mw(case, &sample.features);
                    for j in 0..case.n_farm() {
                        pred.push_str(&format!(
                            "{},{},{},farm_bus{},{},{},{}\n",
                            split_name,
                            sample.id,
                            fmt(speed),
                            case.wind_bus[j] + 1,
                            fmt(sample.wind_mw[j]),
                            run.name,
                            fmt(fc[j]),
                        ));
                    }
                }
            }
        }
    }
    write_atomic(&dir.join("predictions.csv"), &pred)?;

    // decentralized trace when that regime ran
    for run in runs {
        if let Some(trace) = &run.trace {
            let mut tr = header("admm_trace");
            tr.push_str("iteration,rho,max_lmp_change,max_balance_violation,max_flow_excess");
            for j in 0..case.n_farm() {
                tr.push_str(&format!(",profit_farm_bus{}", case.wind_bus[j] + 1));
            }
            tr.push('\n');
            for row in trace {
                tr.push_str(&format!(
                    "{},{},{},{},{}",
                    row.iteration,
                    fmt(row.rho),
                    fmt(row.max_lmp_change),
                    fmt(row.max_balance_violation),
                    fmt(row.max_flow_excess)
                ));
                for p in &row.farm_profits {
                    tr.push_str(&format!(",{}", fmt(*p)));
                }
                tr.push('\n');
            }
            write_atomic(&dir.join("admm_trace.csv"), &tr)?;
        }
    }

    let manifest = json!({
        "schema": "regeq-manifest-v1",
        "config_hash": hash,
        "case": case.name,
        "seed": config.data.seed,
        "n_train": train.len(),
        "n_test": test.len(),
        "regimes": config.regimes.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
        "crate_version": env!("CARGO_PKG_VERSION"),
        "qp_backend": "clarabel 0.11",
        "unix_time": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        "stage_seconds": stage_seconds.iter().map(|(n, s)| json!({"stage": n, "seconds": s})).collect::<Vec<_>>(),
    });
    write_atomic(
        &dir.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}

/// Shortest round-trip decimal formatting keeps outputs byte-stable.
fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

/// Reads the `# config_hash=` line of a result table; downstream tooling
/// refuses to mix tables from different hashes.
pub fn read_csv_config_hash(path: impl AsRef<Path>) -> Result<String, std::io::Error> {
    let text = std::fs::read_to_string(path)?;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# config_hash=") {
            return Ok(rest.trim().to_string());
        }
    }
    Err(std::io::Error::new(
        std::io::ErrorKind::InvalidData,
        "no config_hash header line",
    ))
}
