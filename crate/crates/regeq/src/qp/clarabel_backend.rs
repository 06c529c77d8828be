//! Sparse interior-point backend built on Clarabel.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{QpBackend, QpSolution, QpStatus, QuadraticProgram, SolveSettings};

#[derive(Debug, Clone, Default)]
pub struct ClarabelBackend;

impl QpBackend for ClarabelBackend {
    fn solve(&self, qp: &QuadraticProgram, settings: &SolveSettings) -> QpSolution {
        let n = qp.num_vars();
        let m_eq = qp.num_eq();
        let m_ineq = qp.num_ineq();

        let p = upper_csc(n, &qp.quad_upper_csc_order());
        let a = stacked_constraints_csc(qp);
        let mut b = qp.eq_rhs.clone();
        b.extend_from_slice(&qp.ineq_rhs);

        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if m_eq > 0 {
            cones.push(SupportedConeT::ZeroConeT(m_eq));
        }
        if m_ineq > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(m_ineq));
        }

        // The contract tolerance is on unscaled residuals, while the solver
        // measures the equilibrated problem; over-request by three orders
        // and back off on failure.
        let ladder = [
            (settings.tol * 1e-3).max(1e-12),
            (settings.tol * 1e-2).max(1e-12),
            settings.tol,
        ];
        let mut last = QpSolution::failed(
            QpStatus::Numerical {
                backend: "clarabel: not attempted".into(),
            },
            n,
            m_eq,
            m_ineq,
        );
        for (attempt, &tol) in ladder.iter().enumerate() {
            let mut cfg = DefaultSettings::default();
            cfg.verbose = false;
            cfg.max_iter = settings.max_iter;
            cfg.tol_gap_abs = tol;
            cfg.tol_gap_rel = tol;
            cfg.tol_feas = tol;

            let mut solver = match DefaultSolver::new(&p, qp.lin_cost(), &a, &b, &cones, cfg) {
                Ok(s) => s,
                Err(e) => {
                    return QpSolution::failed(
                        QpStatus::Numerical {
                            backend: format!("clarabel setup: {e:?}"),
                        },
                        n,
                        m_eq,
                        m_ineq,
                    )
                }
            };
            solver.solve();

            let status = match solver.solution.status {
                SolverStatus::Solved => QpStatus::Optimal,
                SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                    QpStatus::Infeasible {
                        backend: format!("{:?}", solver.solution.status),
                    }
                }
                SolverStatus::MaxIterations | SolverStatus::MaxTime => QpStatus::MaxIter {
                    backend: format!("{:?}", solver.solution.status),
                },
                other => QpStatus::Numerical {
                    backend: format!("{other:?}"),
                },
            };

            if status.is_optimal() {
                let x = solver.solution.x.clone();
                let z = &solver.solution.z;
                let y_eq = z[..m_eq].to_vec();
                // tiny negative noise in the nonnegative-cone dual would leak
                // into price extraction; clamp it
                let y_ineq = z[m_eq..].iter().map(|v| v.max(0.0)).collect();
                return QpSolution {
                    objective: qp.objective_at(&x),
                    x,
                    y_eq,
                    y_ineq,
                    status,
                    kkt: Default::default(),
                };
            }
            if matches!(status, QpStatus::Infeasible { .. }) {
                return QpSolution::failed(status, n, m_eq, m_ineq);
            }
            last = QpSolution::failed(status, n, m_eq, m_ineq);
            let _ = attempt;
        }
        last
    }

    fn name(&self) -> &'static str {
        "clarabel"
    }
}

fn upper_csc(n: usize, triplets: &[(usize, usize, f64)]) -> CscMatrix<f64> {
    // triplets are sorted by (col, row) with duplicates already summed
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(triplets.len());
    let mut nzval = Vec::with_capacity(triplets.len());
    let mut idx = 0;
    for col in 0..n {
        colptr[col] = rowval.len();
        while idx < triplets.len() && triplets[idx].1 == col {
            rowval.push(triplets[idx].0);
            nzval.push(triplets[idx].2);
            idx += 1;
        }
    }
    colptr[n] = rowval.len();
    CscMatrix {
        m: n,
        n,
        colptr,
        rowval,
        nzval,
    }
}

fn stacked_constraints_csc(qp: &QuadraticProgram) -> CscMatrix<f64> {
    let n = qp.num_vars();
    let m_eq = qp.num_eq();
    let m = m_eq + qp.num_ineq();
    let mut triplets: Vec<(usize, usize, f64)> =
        Vec::with_capacity(qp.eq.entries.len() + qp.ineq.entries.len());
    for &(r, c, v) in &qp.eq.entries {
        triplets.push((r, c, v));
    }
    for &(r, c, v) in &qp.ineq.entries {
        triplets.push((r + m_eq, c, v));
    }
    triplets.sort_unstable_by_key(|&(r, c, _)| (c, r));

    let mut colptr = vec![0usize; n + 1];
    let mut rowval: Vec<usize> = Vec::with_capacity(triplets.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(triplets.len());
    let mut idx = 0;
    for col in 0..n {
        colptr[col] = rowval.len();
        while idx < triplets.len() && triplets[idx].1 == col {
            let row = triplets[idx].0;
            let mut v = triplets[idx].2;
            idx += 1;
            // sum duplicates within the same (row, col)
            while idx < triplets.len() && triplets[idx].1 == col && triplets[idx].0 == row {
                v += triplets[idx].2;
                idx += 1;
            }
            rowval.push(row);
            nzval.push(v);
        }
    }
    colptr[n] = rowval.len();
    CscMatrix {
        m,
        n,
        colptr,
        rowval,
        nzval,
    }
}
