//! Linearization of the constraint ‖θ‖₁ <= τ with auxiliary bound variables.

use std::ops::Range;

use super::{QpError, QuadraticProgram};

/// Row indices of an encoded ℓ1 ball, for dual extraction and tests.
#[derive(Debug, Clone)]
pub struct L1BallRows {
    /// Per component k: rows for θ_k − t_k <= 0 and −θ_k − t_k <= 0.
    pub abs_rows: Vec<(usize, usize)>,
    /// Row for Σ t <= τ.
    pub sum_row: usize,
}

/// Appends the constraint block
///
/// ```text
///   −t_k <= θ_k <= t_k   for all k,   Σ_k t_k <= τ
/// ```
///
/// over existing variable ranges `theta` and `t_aux` (equal lengths). The
/// projection of the feasible set onto θ is exactly {‖θ‖₁ <= τ}.
pub fn encode_l1_ball(
    qp: &mut QuadraticProgram,
    theta: &Range<usize>,
    t_aux: &Range<usize>,
    tau: f64,
) -> Result<L1BallRows, QpError> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(QpError::NonpositiveRadius(tau));
    }
    if theta.len() != t_aux.len() || theta.is_empty() {
        return Err(QpError::DimensionMismatch);
    }
    let mut abs_rows = Vec::with_capacity(theta.len());
    for (th, t) in theta.clone().zip(t_aux.clone()) {
        let up = qp.add_ineq([(th, 1.0), (t, -1.0)], 0.0);
        let dn = qp.add_ineq([(th, -1.0), (t, -1.0)], 0.0);
        abs_rows.push((up, dn));
    }
    let sum_row = qp.add_ineq(t_aux.clone().map(|t| (t, 1.0)), tau);
    Ok(L1BallRows { abs_rows, sum_row })
}

/// Direct membership check used as the oracle for the encoding.
pub fn l1_ball_contains(theta: &[f64], tau: f64) -> bool {
    theta.iter().map(|v| v.abs()).sum::<f64>() <= tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::{solve_qp, ClarabelBackend, SolveSettings};
    use proptest::prelude::*;

    /// Feasibility of the encoded block for a pinned θ, decided by solving
    /// min Σt subject to the block and θ fixed by equalities.
    fn encoded_feasible(theta_vals: &[f64], tau: f64) -> bool {
        let dim = theta_vals.len();
        let mut qp = QuadraticProgram::new(2 * dim);
        let theta = 0..dim;
        let t_aux = dim..2 * dim;
        for k in 0..dim {
            qp.add_eq([(k, 1.0)], theta_vals[k]);
            qp.add_lin_cost(dim + k, 1.0);
        }
        encode_l1_ball(&mut qp, &theta, &t_aux, tau).unwrap();
        let sol = solve_qp(&ClarabelBackend::default(), &qp, &SolveSettings::default());
        sol.status.is_optimal()
    }

    #[test]
    fn interior_point_is_feasible() {
        assert!(encoded_feasible(&[0.4, -0.4], 1.0));
    }

    #[test]
    fn norm_exceeding_radius_is_infeasible() {
        assert!(!encoded_feasible(&[1.0, 0.5], 1.0));
    }

    #[test]
    fn rejects_nonpositive_radius() {
        let mut qp = QuadraticProgram::new(2);
        let err = encode_l1_ball(&mut qp, &(0..1), &(1..2), 0.0);
        assert!(matches!(err, Err(QpError::NonpositiveRadius(_))));
    }

    proptest! {
        // Encoded feasibility must agree with the direct ‖θ‖₁ <= τ check.
        // Points near the boundary are excluded: a solver cannot decide a
        // measure-zero boundary consistently with exact arithmetic.
        #[test]
        fn matches_direct_norm_check(
            vals in proptest::collection::vec(-4.0f64..4.0, 3),
            tau in 0.5f64..10.0,
        ) {
            let norm: f64 = vals.iter().map(|v| v.abs()).sum();
            prop_assume!((norm - tau).abs() > 1e-3);
            prop_assert_eq!(encoded_feasible(&vals, tau), l1_ball_contains(&vals, tau));
        }

        // The paper-scale radius (τ = 10, 3 features) always admits a
        // feasible t for in-ball θ.
        #[test]
        fn paper_radius_admits_aux(vals in proptest::collection::vec(-3.0f64..3.0, 3)) {
            prop_assume!(vals.iter().map(|v| v.abs()).sum::<f64>() <= 10.0 - 1e-3);
            prop_assert!(encoded_feasible(&vals, 10.0));
        }
    }
}
