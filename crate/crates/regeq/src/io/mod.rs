//! Case and dataset ingestion, synthetic data generation, experiment
//! orchestration and result emission.

mod case_file;
mod config;
mod dataset_file;
mod experiment;
mod synth;

pub use case_file::{load_case, load_case_str, CaseFileError};
pub use config::{
    AdmmSection, DataSection, ExperimentConfig, GameSection, IoConfigError, RegimeName,
    ScheduleSection, SolverSection,
};
pub use dataset_file::{load_dataset, load_records, split_dataset, DatasetError, SplitSpec};
pub use experiment::{read_csv_config_hash, run_experiment, ExperimentError, ExperimentOutcome};
pub use synth::{synth_wind, write_synth_csv};
