//! Sample data, regression profiles and market outcome records.

use serde::{Deserialize, Serialize};

use super::NetworkCase;

/// One historical observation: transformed features plus the realized wind
/// power of every farm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    pub id: usize,
    /// Kernel-transformed feature vector, shared by all farms.
    pub features: Vec<f64>,
    /// Realized wind power per farm, MW.
    pub wind_mw: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_dim: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Stacked per-farm regression parameters. Rows are stored in
/// capacity-normalized units (power fraction per unit feature), so one
/// ℓ1 radius applies uniformly across farms of different size; the market
/// boundary rescales to MW through the farm capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionProfile {
    pub theta: Vec<Vec<f64>>,
}

impl RegressionProfile {
    pub fn n_farm(&self) -> usize {
        self.theta.len()
    }

    pub fn l1_norms(&self) -> Vec<f64> {
        self.theta
            .iter()
            .map(|row| row.iter().map(|v| v.abs()).sum())
            .collect()
    }

    /// Per-farm forecast in MW for one feature vector.
    pub fn forecast_mw(&self, case: &NetworkCase, phi: &[f64]) -> Vec<f64> {
        self.theta
            .iter()
            .zip(&case.wind_cap)
            .map(|(row, cap)| cap * dot(row, phi))
            .collect()
    }

    /// Bus-expanded forecast vector (zeros away from wind buses), MW.
    pub fn forecast_bus(&self, case: &NetworkCase, phi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; case.n_bus];
        for (j, &bus) in case.wind_bus.iter().enumerate() {
            out[bus] = case.wind_cap[j] * dot(&self.theta[j], phi);
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Market decisions for one sample, bus-indexed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispatchDecision {
    pub p: Vec<f64>,
    pub r_up: Vec<f64>,
    pub r_dn: Vec<f64>,
    pub shed: Vec<f64>,
}

impl DispatchDecision {
    pub fn zeros(n_bus: usize) -> Self {
        Self {
            p: vec![0.0; n_bus],
            r_up: vec![0.0; n_bus],
            r_dn: vec![0.0; n_bus],
            shed: vec![0.0; n_bus],
        }
    }

    /// p + r+ − r−, the delivered generation.
    pub fn delivered(&self) -> Vec<f64> {
        self.p
            .iter()
            .zip(&self.r_up)
            .zip(&self.r_dn)
            .map(|((p, up), dn)| p + up - dn)
            .collect()
    }
}

/// Raw constraint multipliers of one sample, in price units ($/MWh),
/// all nonnegative at a valid solution.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RawDuals {
    pub mu1: f64,
    pub mu2: f64,
    pub kbar1: Vec<f64>,
    pub kun1: Vec<f64>,
    pub kbar2: Vec<f64>,
    pub kun2: Vec<f64>,
}

impl RawDuals {
    pub fn zeros(n_line: usize) -> Self {
        Self {
            mu1: 0.0,
            mu2: 0.0,
            kbar1: vec![0.0; n_line],
            kun1: vec![0.0; n_line],
            kbar2: vec![0.0; n_line],
            kun2: vec![0.0; n_line],
        }
    }

    pub fn min_value(&self) -> f64 {
        let line_min = self
            .kbar1
            .iter()
            .chain(&self.kun1)
            .chain(&self.kbar2)
            .chain(&self.kun2)
            .cloned()
            .fold(f64::INFINITY, f64::min);
        self.mu1.min(self.mu2).min(line_min)
    }
}

/// Per-sample price system: raw duals plus composed locational prices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceSystem {
    pub duals: RawDuals,
    pub lmp_da: Vec<f64>,
    pub lmp_rt: Vec<f64>,
}
