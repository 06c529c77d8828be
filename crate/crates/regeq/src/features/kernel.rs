//! Gaussian kernel transformations of raw wind measurements.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("kernel scale must be > 0 for feature `{0}`")]
    NonpositiveScale(String),
    #[error("kernel centers for `{0}` must be strictly increasing and nonempty")]
    BadCenters(String),
    #[error("record has {got} raw features, kernel config expects {want}")]
    ArityMismatch { got: usize, want: usize },
    #[error("non-finite raw feature value for `{0}`")]
    NonfiniteInput(String),
}

/// One raw feature's kernel bank: centers μ in raw units and a scale ς in
/// inverse squared units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureKernel {
    pub name: String,
    pub scale: f64,
    pub centers: Vec<f64>,
}

/// Kernel banks for every raw feature, applied in order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelConfig {
    pub features: Vec<FeatureKernel>,
}

impl KernelConfig {
    /// Total transformed dimension |φ| = Σ centers.
    pub fn dim(&self) -> usize {
        self.features.iter().map(|f| f.centers.len()).sum()
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        for f in &self.features {
            if f.scale <= 0.0 || !f.scale.is_finite() {
                return Err(KernelError::NonpositiveScale(f.name.clone()));
            }
            if f.centers.is_empty() || f.centers.windows(2).any(|w| w[0] >= w[1]) {
                return Err(KernelError::BadCenters(f.name.clone()));
            }
        }
        Ok(())
    }

    /// Ten kernels per raw feature: wind speed on 2..=11 m/s with ς = 0.3,
    /// direction on [0°, 360°) with ς = 0.03, blade pitch over the observed
    /// range with ς = 0.7. Thirty transformed features in total.
    pub fn defaults(pitch_range: (f64, f64)) -> Self {
        let (lo, hi) = pitch_range;
        let span = (hi - lo).max(1e-6);
        Self {
            features: vec![
                FeatureKernel {
                    name: "wind_speed".into(),
                    scale: 0.3,
                    centers: (0..10).map(|k| 2.0 + k as f64).collect(),
                },
                FeatureKernel {
                    name: "wind_direction".into(),
                    scale: 0.03,
                    centers: (0..10).map(|k| 36.0 * k as f64).collect(),
                },
                FeatureKernel {
                    name: "pitch_angle".into(),
                    scale: 0.7,
                    centers: (0..10).map(|k| lo + span * k as f64 / 9.0).collect(),
                },
            ],
        }
    }
}

/// One raw measurement row. Power is stored as a capacity fraction so a
/// single kernel configuration serves farms of any size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub timestamp: i64,
    /// Power output as a fraction of capacity, in [0, 1].
    pub power: f64,
    /// Raw feature values in kernel-config order.
    pub features: Vec<f64>,
}

/// φ[k] = exp(−ς_f (μ_k − x_f)²) for kernel k of raw feature f. Every
/// entry lies in (0, 1]; the output does not depend on the timestamp.
pub fn gaussian_features(record: &RawRecord, config: &KernelConfig) -> Result<Vec<f64>, KernelError> {
    if record.features.len() != config.features.len() {
        return Err(KernelError::ArityMismatch {
            got: record.features.len(),
            want: config.features.len(),
        });
    }
    let mut phi = Vec::with_capacity(config.dim());
    for (f, &x) in config.features.iter().zip(&record.features) {
        if !x.is_finite() {
            return Err(KernelError::NonfiniteInput(f.name.clone()));
        }
        for &mu in &f.centers {
            phi.push((-f.scale * (mu - x) * (mu - x)).exp());
        }
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn config() -> KernelConfig {
        KernelConfig {
            features: vec![
                FeatureKernel {
                    name: "wind_speed".into(),
                    scale: 0.3,
                    centers: vec![5.0, 8.0],
                },
                FeatureKernel {
                    name: "wind_direction".into(),
                    scale: 0.03,
                    centers: vec![180.0],
                },
            ],
        }
    }

    #[test]
    fn value_at_center_is_one() {
        let rec = RawRecord {
            timestamp: 0,
            power: 0.5,
            features: vec![5.0, 180.0],
        };
        let phi = gaussian_features(&rec, &config()).unwrap();
        assert_abs_diff_eq!(phi[0], 1.0);
        assert_abs_diff_eq!(phi[2], 1.0);
        assert!(phi.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn off_center_value_matches_formula() {
        let rec = RawRecord {
            timestamp: 7,
            power: 0.5,
            features: vec![6.0, 0.0],
        };
        let phi = gaussian_features(&rec, &config()).unwrap();
        // ς = 0.3, μ = 5, x = 6
        assert_abs_diff_eq!(phi[0], (-0.3f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(phi[0], 0.740818, epsilon = 1e-6);
    }

    #[test]
    fn independent_of_timestamp() {
        let mut rec = RawRecord {
            timestamp: 0,
            power: 0.1,
            features: vec![7.3, 42.0],
        };
        let a = gaussian_features(&rec, &config()).unwrap();
        rec.timestamp = 123_456_789;
        let b = gaussian_features(&rec, &config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nonfinite_input_is_rejected() {
        let rec = RawRecord {
            timestamp: 0,
            power: 0.5,
            features: vec![f64::NAN, 10.0],
        };
        assert!(matches!(
            gaussian_features(&rec, &config()),
            Err(KernelError::NonfiniteInput(_))
        ));
    }

    #[test]
    fn default_bank_has_thirty_features() {
        let cfg = KernelConfig::defaults((0.0, 25.0));
        cfg.validate().unwrap();
        assert_eq!(cfg.dim(), 30);
        assert_eq!(cfg.features[0].centers, (2..=11).map(|v| v as f64).collect::<Vec<_>>());
        assert_abs_diff_eq!(cfg.features[1].scale, 0.03);
    }

    #[test]
    fn validate_rejects_unsorted_centers() {
        let cfg = KernelConfig {
            features: vec![FeatureKernel {
                name: "x".into(),
                scale: 1.0,
                centers: vec![2.0, 1.0],
            }],
        };
        assert!(matches!(cfg.validate(), Err(KernelError::BadCenters(_))));
    }
}
