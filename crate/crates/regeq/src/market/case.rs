//! Grid and fleet parameters.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("bus-indexed field `{0}` has wrong length")]
    BadLength(&'static str),
    #[error("ptdf is {rows}×{cols}, expected {lines} lines × {buses} buses")]
    BadPtdf {
        rows: usize,
        cols: usize,
        lines: usize,
        buses: usize,
    },
    #[error("cost order c+ > c > c- violated at bus {bus} (c+={up}, c={lin}, c-={dn})")]
    CostOrder {
        bus: usize,
        up: f64,
        lin: f64,
        dn: f64,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Static description of the grid, generator fleet, loads and wind farms.
/// All bus-indexed vectors have length `n_bus`; buses without a generator
/// carry `p_min = p_max = 0` instead of being dropped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkCase {
    pub name: String,
    pub n_bus: usize,
    /// Power transfer distribution factors, lines × buses.
    pub ptdf: Vec<Vec<f64>>,
    /// Per-line flow limit, MW.
    pub line_limit: Vec<f64>,
    /// Per-bus demand, MW.
    pub demand: Vec<f64>,
    /// Linear generation cost c, $/MWh.
    pub gen_cost_lin: Vec<f64>,
    /// Quadratic generation cost diag(C), $/MWh².
    pub gen_cost_quad: Vec<f64>,
    /// Upward regulation cost c+, $/MWh.
    pub reg_up_cost: Vec<f64>,
    /// Downward regulation cost c-, $/MWh.
    pub reg_dn_cost: Vec<f64>,
    /// Linear shedding cost s, $/MWh.
    pub shed_cost_lin: Vec<f64>,
    /// Quadratic shedding cost diag(S), $/MWh².
    pub shed_cost_quad: Vec<f64>,
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    /// Buses hosting the wind farms, one farm per listed bus.
    pub wind_bus: Vec<usize>,
    /// Per-farm capacity, MW.
    pub wind_cap: Vec<f64>,
}

impl NetworkCase {
    pub fn n_line(&self) -> usize {
        self.line_limit.len()
    }

    pub fn n_farm(&self) -> usize {
        self.wind_bus.len()
    }

    /// A bus hosts a generator when its capacity interval is not {0}.
    pub fn is_gen_bus(&self, bus: usize) -> bool {
        self.p_min[bus] != 0.0 || self.p_max[bus] != 0.0
    }

    pub fn gen_buses(&self) -> Vec<usize> {
        (0..self.n_bus).filter(|&b| self.is_gen_bus(b)).collect()
    }

    pub fn load_buses(&self) -> Vec<usize> {
        (0..self.n_bus).filter(|&b| self.demand[b] > 0.0).collect()
    }

    pub fn ptdf_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_line(), self.n_bus, |l, b| self.ptdf[l][b])
    }

    pub fn validate(&self) -> Result<(), CaseError> {
        let nb = self.n_bus;
        let check = |name: &'static str, len: usize| {
            if len != nb {
                Err(CaseError::BadLength(name))
            } else {
                Ok(())
            }
        };
        check("demand", self.demand.len())?;
        check("gen_cost_lin", self.gen_cost_lin.len())?;
        check("gen_cost_quad", self.gen_cost_quad.len())?;
        check("reg_up_cost", self.reg_up_cost.len())?;
        check("reg_dn_cost", self.reg_dn_cost.len())?;
        check("shed_cost_lin", self.shed_cost_lin.len())?;
        check("shed_cost_quad", self.shed_cost_quad.len())?;
        check("p_min", self.p_min.len())?;
        check("p_max", self.p_max.len())?;
        if self.ptdf.len() != self.n_line() || self.ptdf.iter().any(|row| row.len() != nb) {
            return Err(CaseError::BadPtdf {
                rows: self.ptdf.len(),
                cols: self.ptdf.first().map_or(0, |r| r.len()),
                lines: self.n_line(),
                buses: nb,
            });
        }
        for (l, &f) in self.line_limit.iter().enumerate() {
            if f <= 0.0 {
                return Err(CaseError::Invariant(format!("line {l} limit must be > 0")));
            }
        }
        for bus in 0..nb {
            if self.demand[bus] < 0.0 {
                return Err(CaseError::Invariant(format!("demand at bus {bus} < 0")));
            }
            if self.p_min[bus] > self.p_max[bus] {
                return Err(CaseError::Invariant(format!("p_min > p_max at bus {bus}")));
            }
            if self.is_gen_bus(bus) {
                let (up, lin, dn) = (
                    self.reg_up_cost[bus],
                    self.gen_cost_lin[bus],
                    self.reg_dn_cost[bus],
                );
                if !(up > lin && lin > dn) {
                    return Err(CaseError::CostOrder { bus, up, lin, dn });
                }
                if self.gen_cost_quad[bus] <= 0.0 {
                    return Err(CaseError::Invariant(format!(
                        "quadratic generation cost at bus {bus} must be > 0"
                    )));
                }
            }
            if self.demand[bus] > 0.0 && self.shed_cost_quad[bus] <= 0.0 {
                return Err(CaseError::Invariant(format!(
                    "quadratic shedding cost at bus {bus} must be > 0"
                )));
            }
        }
        let mut seen = vec![false; nb];
        for (j, &b) in self.wind_bus.iter().enumerate() {
            if b >= nb {
                return Err(CaseError::Invariant(format!("wind farm {j} on unknown bus {b}")));
            }
            if seen[b] {
                return Err(CaseError::Invariant(format!("more than one wind farm on bus {b}")));
            }
            seen[b] = true;
            if self.wind_cap[j] <= 0.0 {
                return Err(CaseError::Invariant(format!("wind farm {j} capacity must be > 0")));
            }
        }
        if self.wind_cap.len() != self.wind_bus.len() {
            return Err(CaseError::BadLength("wind_cap"));
        }
        Ok(())
    }
}

/// Relabels buses by `perm` (new index -> old index), consistently across
/// every field. Clearing outcomes must be invariant under this map.
pub fn permute_buses(case: &NetworkCase, perm: &[usize]) -> NetworkCase {
    let take = |v: &[f64]| perm.iter().map(|&old| v[old]).collect::<Vec<_>>();
    let inverse: Vec<usize> = {
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        inv
    };
    NetworkCase {
        name: format!("{}-permuted", case.name),
        n_bus: case.n_bus,
        ptdf: case
            .ptdf
            .iter()
            .map(|row| perm.iter().map(|&old| row[old]).collect())
            .collect(),
        line_limit: case.line_limit.clone(),
        demand: take(&case.demand),
        gen_cost_lin: take(&case.gen_cost_lin),
        gen_cost_quad: take(&case.gen_cost_quad),
        reg_up_cost: take(&case.reg_up_cost),
        reg_dn_cost: take(&case.reg_dn_cost),
        shed_cost_lin: take(&case.shed_cost_lin),
        shed_cost_quad: take(&case.shed_cost_quad),
        p_min: take(&case.p_min),
        p_max: take(&case.p_max),
        wind_bus: case.wind_bus.iter().map(|&b| inverse[b]).collect(),
        wind_cap: case.wind_cap.clone(),
    }
}
