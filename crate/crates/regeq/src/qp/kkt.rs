//! KKT residual recomputation, independent of any backend's internal
//! accounting.

use super::{KktResiduals, QpError, QpSolution, QuadraticProgram};

/// Recomputes stationarity, primal and complementarity residuals from the
/// raw problem data. Refuses non-optimal solutions.
pub fn kkt_residuals(qp: &QuadraticProgram, sol: &QpSolution) -> Result<KktResiduals, QpError> {
    if !sol.status.is_optimal() {
        return Err(QpError::NotOptimal(format!("{}", sol.status)));
    }
    if sol.x.len() != qp.num_vars()
        || sol.y_eq.len() != qp.num_eq()
        || sol.y_ineq.len() != qp.num_ineq()
    {
        return Err(QpError::DimensionMismatch);
    }

    // stationarity: Px + q + Aᵀ y_eq + Gᵀ y_ineq
    let mut grad = qp.lin_cost().to_vec();
    qp.quad_mul_acc(&sol.x, &mut grad);
    qp.eq.mul_transpose_acc(&sol.y_eq, &mut grad);
    qp.ineq.mul_transpose_acc(&sol.y_ineq, &mut grad);
    let stationarity = max_abs(&grad);

    // primal equality: Ax − b
    let mut ax = vec![0.0; qp.num_eq()];
    qp.eq.mul_acc(&sol.x, &mut ax);
    let primal_eq = ax
        .iter()
        .zip(&qp.eq_rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    // primal inequality: [Gx − h]₊ and complementarity y ∘ (h − Gx)
    let mut gx = vec![0.0; qp.num_ineq()];
    qp.ineq.mul_acc(&sol.x, &mut gx);
    let mut primal_ineq = 0.0f64;
    let mut complementarity = 0.0f64;
    for i in 0..qp.num_ineq() {
        let slack = qp.ineq_rhs[i] - gx[i];
        primal_ineq = primal_ineq.max(-slack);
        complementarity = complementarity.max((sol.y_ineq[i] * slack).abs());
    }
    primal_ineq = primal_ineq.max(0.0);

    Ok(KktResiduals {
        stationarity,
        primal_eq,
        primal_ineq,
        complementarity,
    })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}
