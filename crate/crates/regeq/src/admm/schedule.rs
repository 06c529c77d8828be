//! Piecewise-constant step-size schedules.

use serde::{Deserialize, Serialize};

/// Maps the iteration index to a positive step size ρ through finitely
/// many breakpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepSchedule {
    /// (first iteration, ρ) pairs, ascending, starting at 0.
    points: Vec<(usize, f64)>,
}

impl StepSchedule {
    pub fn constant(rho: f64) -> Self {
        Self::piecewise(&[(0, rho)]).expect("constant schedule")
    }

    pub fn piecewise(points: &[(usize, f64)]) -> Result<Self, String> {
        if points.is_empty() || points[0].0 != 0 {
            return Err("schedule must start at iteration 0".into());
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err("breakpoints must be strictly increasing".into());
        }
        if points.iter().any(|&(_, r)| !(r > 0.0) || !r.is_finite()) {
            return Err("step sizes must be positive and finite".into());
        }
        Ok(Self {
            points: points.to_vec(),
        })
    }

    /// The published reference schedule: ρ = 100 up to iteration 199, then
    /// 10, 5 and 1 from iterations 200, 230 and 275.
    pub fn published() -> Self {
        Self::piecewise(&[(0, 100.0), (200, 10.0), (230, 5.0), (275, 1.0)]).unwrap()
    }

    /// Geometric decay ρ₀·factor^k clipped below at `floor`, materialized
    /// into breakpoints up to `max_iter`.
    pub fn geometric(rho0: f64, factor: f64, floor: f64, max_iter: usize) -> Result<Self, String> {
        if !(rho0 > 0.0) || !(floor > 0.0) || !(0.0 < factor && factor < 1.0) {
            return Err("need rho0 > 0, floor > 0, 0 < factor < 1".into());
        }
        let mut points = Vec::new();
        let mut rho = rho0;
        let mut last = f64::NAN;
        for k in 0..=max_iter {
            let clipped = rho.max(floor);
            if clipped != last {
                points.push((k, clipped));
                last = clipped;
            }
            if clipped <= floor {
                break;
            }
            rho *= factor;
        }
        Self::piecewise(&points)
    }

    /// Geometric descent from `rho0` to a working step `hold`, a hold
    /// phase until `hold_until` while the slowest dual components settle,
    /// then a geometric quench to `floor`.
    pub fn anneal_hold_quench(
        rho0: f64,
        hold: f64,
        hold_until: usize,
        floor: f64,
    ) -> Result<Self, String> {
        if !(rho0 >= hold && hold >= floor && floor > 0.0) {
            return Err("need rho0 >= hold >= floor > 0".into());
        }
        let mut points = Vec::new();
        let mut rho = rho0;
        let mut k = 0usize;
        while rho > hold {
            points.push((k, rho));
            rho *= 0.99;
            k += 1;
        }
        points.push((k, hold));
        let mut k = hold_until.max(k + 1);
        let mut rho = hold;
        while rho > floor {
            rho = (rho * 0.99).max(floor);
            points.push((k, rho));
            k += 1;
        }
        Self::piecewise(&points)
    }

    pub fn rho(&self, iteration: usize) -> f64 {
        let mut current = self.points[0].1;
        for &(start, r) in &self.points {
            if iteration >= start {
                current = r;
            } else {
                break;
            }
        }
        current
    }
}
