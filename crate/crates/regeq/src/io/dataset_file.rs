//! Wind dataset CSV ingestion and deterministic splitting.
//!
//! Expected columns: `timestamp,power,wind_speed,wind_direction,pitch_angle`.
//! `power` is the capacity fraction in [0, 1]; it applies to every farm
//! (all farms are granted the same dataset and features), scaled to MW by
//! each farm's capacity on ingest.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::features::{gaussian_features, KernelConfig, KernelError, RawRecord};
use crate::market::{Dataset, NetworkCase, Sample};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset: {0}")]
    Read(#[from] std::io::Error),
    #[error("csv parse error: {0}")]
    Parse(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row}: {msg}")]
    BadRow { row: usize, msg: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("dataset too small: {have} rows for a requested split of {want}")]
    TooSmall { have: usize, want: usize },
}

pub const DATASET_COLUMNS: [&str; 5] = [
    "timestamp",
    "power",
    "wind_speed",
    "wind_direction",
    "pitch_angle",
];

/// Reads raw records; feature order is wind_speed, wind_direction,
/// pitch_angle to match the default kernel banks.
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<RawRecord>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let col = |name: &'static str| -> Result<usize, DatasetError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(DatasetError::MissingColumn(name))
    };
    let (ts, power, speed, direction, pitch) = (
        col("timestamp")?,
        col("power")?,
        col("wind_speed")?,
        col("wind_direction")?,
        col("pitch_angle")?,
    );

    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse = |idx: usize, name: &str| -> Result<f64, DatasetError> {
            rec.get(idx)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| DatasetError::BadRow {
                    row: row + 2,
                    msg: format!("cannot parse `{name}`"),
                })
        };
        let p = parse(power, "power")?;
        if !(0.0..=1.0 + 1e-9).contains(&p) {
            return Err(DatasetError::BadRow {
                row: row + 2,
                msg: format!("power {p} outside [0, 1] capacity fraction"),
            });
        }
        records.push(RawRecord {
            timestamp: rec
                .get(ts)
                .and_then(|v| v.trim().parse::<i64>().ok())
                .unwrap_or(row as i64),
            power: p,
            features: vec![
                parse(speed, "wind_speed")?,
                parse(direction, "wind_direction")?,
                parse(pitch, "pitch_angle")?,
            ],
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
}

/// Kernel-transforms records into case-shaped samples. One power series
/// drives every farm, rescaled by capacity.
fn to_dataset(
    records: &[RawRecord],
    kernels: &KernelConfig,
    case: &NetworkCase,
) -> Result<Dataset, DatasetError> {
    let mut samples = Vec::with_capacity(records.len());
    for (id, rec) in records.iter().enumerate() {
        let features = gaussian_features(rec, kernels)?;
        let wind_mw = case.wind_cap.iter().map(|cap| rec.power * cap).collect();
        samples.push(Sample {
            id,
            features,
            wind_mw,
        });
    }
    Ok(Dataset {
        feature_dim: kernels.dim(),
        samples,
    })
}

/// Seeded shuffle-then-split of transformed records into train and test
/// sets. Identical inputs always reproduce the same split.
pub fn split_dataset(
    records: &[RawRecord],
    kernels: &KernelConfig,
    case: &NetworkCase,
    spec: &SplitSpec,
) -> Result<(Dataset, Dataset), DatasetError> {
    let want = spec.n_train + spec.n_test;
    if records.len() < want {
        return Err(DatasetError::TooSmall {
            have: records.len(),
            want,
        });
    }
    let full = to_dataset(records, kernels, case)?;
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let take = |idxs: &[usize]| -> Dataset {
        Dataset {
            feature_dim: full.feature_dim,
            samples: idxs
                .iter()
                .map(|&i| full.samples[i].clone())
                .collect(),
        }
    };
    let train = take(&order[..spec.n_train]);
    let test = take(&order[spec.n_train..want]);
    Ok((train, test))
}

/// Convenience: records from disk straight into splits.
pub fn load_dataset(
    path: impl AsRef<Path>,
    kernels: &KernelConfig,
    case: &NetworkCase,
    spec: &SplitSpec,
) -> Result<(Dataset, Dataset), DatasetError> {
    let records = load_records(path)?;
    split_dataset(&records, kernels, case, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKernel;
    use crate::fixtures::three_bus_case;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn small_kernels() -> KernelConfig {
        KernelConfig {
            features: vec![
                FeatureKernel { name: "wind_speed".into(), scale: 0.3, centers: vec![4.0, 8.0] },
                FeatureKernel { name: "wind_direction".into(), scale: 0.03, centers: vec![180.0] },
                FeatureKernel { name: "pitch_angle".into(), scale: 0.7, centers: vec![0.0, 10.0] },
            ],
        }
    }

    fn write_csv(rows: &[(i64, f64, f64, f64, f64)]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "timestamp,power,wind_speed,wind_direction,pitch_angle").unwrap();
        for (t, p, s, d, a) in rows {
            writeln!(f, "{t},{p},{s},{d},{a}").unwrap();
        }
        f
    }

    #[test]
    fn three_row_csv_round_trips() {
        let f = write_csv(&[
            (0, 0.5, 4.0, 180.0, 0.0),
            (600, 0.25, 9.0, 90.0, 5.0),
            (1200, 1.0, 12.0, 270.0, 12.0),
        ]);
        let records = load_records(f.path()).unwrap();
        assert_eq!(records.len(), 3);
        let case = three_bus_case();
        let kernels = small_kernels();
        let (train, test) = split_dataset(
            &records,
            &kernels,
            &case,
            &SplitSpec { seed: 1, n_train: 2, n_test: 1 },
        )
        .unwrap();
        assert_eq!(train.len(), 2);
        assert_eq!(test.len(), 1);
        assert_eq!(train.feature_dim, 5);
        // record at a kernel center transforms to a unit feature
        let full = to_dataset(&records, &kernels, &case).unwrap();
        assert_abs_diff_eq!(full.samples[0].features[0], 1.0);
        assert_abs_diff_eq!(full.samples[0].features[2], 1.0);
        // power scales by each farm's capacity
        assert_abs_diff_eq!(full.samples[0].wind_mw[0], 30.0);
        assert_abs_diff_eq!(full.samples[0].wind_mw[1], 40.0);
    }

    #[test]
    fn split_is_deterministic() {
        let rows: Vec<(i64, f64, f64, f64, f64)> = (0..30)
            .map(|i| (i, (i as f64 / 30.0), 3.0 + i as f64 * 0.3, 10.0 * i as f64 % 360.0, 1.0))
            .collect();
        let f = write_csv(&rows);
        let records = load_records(f.path()).unwrap();
        let case = three_bus_case();
        let spec = SplitSpec { seed: 42, n_train: 20, n_test: 10 };
        let (a_train, _) = split_dataset(&records, &small_kernels(), &case, &spec).unwrap();
        let (b_train, _) = split_dataset(&records, &small_kernels(), &case, &spec).unwrap();
        let ids_a: Vec<usize> = a_train.samples.iter().map(|s| s.id).collect();
        let ids_b: Vec<usize> = b_train.samples.iter().map(|s| s.id).collect();
        assert_eq!(ids_a, ids_b);
    }

    #[test]
    fn missing_column_is_reported() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "timestamp,power,wind_speed,wind_direction").unwrap();
        writeln!(f, "0,0.5,4.0,180.0").unwrap();
        assert!(matches!(
            load_records(f.path()),
            Err(DatasetError::MissingColumn("pitch_angle"))
        ));
    }

    #[test]
    fn out_of_range_power_is_rejected() {
        let f = write_csv(&[(0, 1.7, 4.0, 180.0, 0.0)]);
        assert!(matches!(load_records(f.path()), Err(DatasetError::BadRow { .. })));
    }
}
