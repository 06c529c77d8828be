//! Gaussian-kernel feature engineering and single-producer regressions:
//! the accuracy-focused baseline fit and the price-taking revenue fit.

mod fit;
mod kernel;

pub use fit::{fit_baseline, fit_price_taker, predict, FarmSeries, FitError, PriceTakerFit};
pub use kernel::{gaussian_features, FeatureKernel, KernelConfig, KernelError, RawRecord};
