//! Convex QP abstraction with dual recovery.
//!
//! Two interchangeable backends sit behind [`QpBackend`]: a sparse
//! interior-point backend (Clarabel) used for production solves, and a
//! self-contained dense interior-point method used for cross-solver audits
//! and small problems. Acceptance-level checks run against the interface
//! only, never against backend internals.

mod clarabel_backend;
mod dense_ipm;
mod dump;
mod kkt;
mod l1ball;
mod problem;
mod solution;

pub use clarabel_backend::ClarabelBackend;
pub use dense_ipm::DenseIpmBackend;
pub use dump::write_dump;
pub use kkt::kkt_residuals;
pub use l1ball::{encode_l1_ball, l1_ball_contains, L1BallRows};
pub use problem::{QuadraticProgram, TripletMat, VarMap};
pub use solution::{KktResiduals, QpSolution, QpStatus};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("inconsistent problem dimensions")]
    DimensionMismatch,
    #[error("quadratic term is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("ℓ1-ball radius must be positive, got {0}")]
    NonpositiveRadius(f64),
    #[error("operation requires an optimal solution, status was {0}")]
    NotOptimal(String),
}

/// Solver tolerances and limits. The tolerance is stated on unscaled
/// residuals; scaling is a backend concern.
#[derive(Debug, Clone)]
pub struct SolveSettings {
    pub tol: f64,
    pub max_iter: u32,
    /// Optional initial-point hint; backends may ignore it.
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            warm_start: None,
        }
    }
}

impl SolveSettings {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// A pluggable QP solver. Implementations never panic on solvable input;
/// failures are reported through [`QpStatus`].
pub trait QpBackend: Send + Sync {
    fn solve(&self, qp: &QuadraticProgram, settings: &SolveSettings) -> QpSolution;
    fn name(&self) -> &'static str;
}

/// Solves a standard-form QP and attaches recomputed KKT residuals.
pub fn solve_qp(backend: &dyn QpBackend, qp: &QuadraticProgram, settings: &SolveSettings) -> QpSolution {
    if let Err(e) = qp.validate() {
        return QpSolution::failed(
            QpStatus::Numerical {
                backend: format!("validation: {e}"),
            },
            qp.num_vars(),
            qp.num_eq(),
            qp.num_ineq(),
        );
    }
    let mut sol = backend.solve(qp, settings);
    if sol.status.is_optimal() {
        if let Ok(res) = kkt_residuals(qp, &sol) {
            sol.kkt = res;
        }
    }
    sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn backends() -> Vec<Box<dyn QpBackend>> {
        vec![Box::new(ClarabelBackend::default()), Box::new(DenseIpmBackend::default())]
    }

    #[test]
    fn scalar_bound_qp_recovers_dual() {
        // min x² s.t. x >= 1 → x = 1, inequality dual 2.
        for b in backends() {
            let mut qp = QuadraticProgram::new(1);
            qp.add_quad_cost(0, 0, 1.0);
            qp.add_ineq([(0, -1.0)], -1.0);
            let sol = solve_qp(b.as_ref(), &qp, &SolveSettings::default());
            assert!(sol.status.is_optimal(), "{}: {:?}", b.name(), sol.status);
            assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-6);
            assert_relative_eq!(sol.y_ineq[0], 2.0, epsilon = 1e-6);
            assert!(sol.kkt.max() < 1e-6, "{}: kkt {:?}", b.name(), sol.kkt);
        }
    }

    #[test]
    fn feasible_unconstrained_optimum() {
        // min ‖x‖² s.t. 1ᵀx = 0 → x = 0, dual 0.
        for b in backends() {
            let mut qp = QuadraticProgram::new(3);
            for i in 0..3 {
                qp.add_quad_cost(i, i, 1.0);
            }
            qp.add_eq((0..3).map(|i| (i, 1.0)), 0.0);
            let sol = solve_qp(b.as_ref(), &qp, &SolveSettings::default());
            assert!(sol.status.is_optimal());
            for v in &sol.x {
                assert!(v.abs() < 1e-7);
            }
            assert!(sol.y_eq[0].abs() < 1e-7);
        }
    }

    fn random_feasible_qp(seed: u64) -> QuadraticProgram {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 6;
        // P = LᵀL + small ridge keeps it PSD.
        let l: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut qp = QuadraticProgram::new(n);
        for i in 0..n {
            for j in i..n {
                let mut v = 0.0;
                for row in &l {
                    v += row[i] * row[j];
                }
                if i == j {
                    v += 0.1;
                }
                qp.add_quad_cost(i, j, v);
            }
            qp.add_lin_cost(i, rng.gen_range(-1.0..1.0));
        }
        // Box keeps it feasible and bounded; one equality ties variables.
        for i in 0..n {
            qp.add_ineq([(i, 1.0)], 2.0);
            qp.add_ineq([(i, -1.0)], 2.0);
        }
        qp.add_eq([(0, 1.0), (1, 1.0)], 0.5);
        qp
    }

    #[test]
    fn random_psd_problems_pass_residual_oracle() {
        for seed in 0..10u64 {
            let qp = random_feasible_qp(seed);
            for b in backends() {
                let sol = solve_qp(b.as_ref(), &qp, &SolveSettings::default());
                assert!(sol.status.is_optimal(), "{} seed {seed}", b.name());
                assert!(
                    sol.kkt.max() <= 1e-6,
                    "{} seed {seed}: residuals {:?}",
                    b.name(),
                    sol.kkt
                );
            }
        }
    }

    #[test]
    fn backends_agree_on_objective() {
        for seed in 0..10u64 {
            let qp = random_feasible_qp(seed);
            let a = solve_qp(&ClarabelBackend::default(), &qp, &SolveSettings::default());
            let b = solve_qp(&DenseIpmBackend::default(), &qp, &SolveSettings::default());
            assert_relative_eq!(a.objective, b.objective, max_relative = 1e-6, epsilon = 1e-8);
        }
    }

    #[test]
    fn objective_invariant_under_constraint_permutation() {
        let qp = random_feasible_qp(3);
        let base = solve_qp(&ClarabelBackend::default(), &qp, &SolveSettings::default());

        // Rebuild with inequality rows reversed.
        let mut permuted = QuadraticProgram::new(qp.num_vars());
        for &(i, j, v) in &qp.quad_upper_csc_order() {
            // quad_upper triplets already encode the 1/2-convention entries;
            // re-add through raw pushes by reconstructing coefficient form.
            if i == j {
                permuted.add_quad_cost(i, i, v / 2.0);
            } else {
                permuted.add_quad_cost(i, j, v);
            }
        }
        for (i, &c) in qp.lin_cost().iter().enumerate() {
            permuted.add_lin_cost(i, c);
        }
        let rows = qp.ineq.to_dense(qp.num_vars());
        for r in (0..rows.len()).rev() {
            let coeffs: Vec<(usize, f64)> = rows[r]
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(c, v)| (c, *v))
                .collect();
            permuted.add_ineq(coeffs, qp.ineq_rhs[r]);
        }
        for r in 0..qp.num_eq() {
            let row = qp.eq.to_dense(qp.num_vars());
            let coeffs: Vec<(usize, f64)> = row[r]
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(c, v)| (c, *v))
                .collect();
            permuted.add_eq(coeffs, qp.eq_rhs[r]);
        }
        let perm = solve_qp(&ClarabelBackend::default(), &permuted, &SolveSettings::default());
        assert_relative_eq!(base.objective, perm.objective, epsilon = 1e-9, max_relative = 1e-9);
    }
}
