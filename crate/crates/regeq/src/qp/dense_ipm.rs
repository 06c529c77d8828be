//! Self-contained dense primal-dual interior-point backend.
//!
//! Mehrotra predictor-corrector on the standard form, with dense LU on the
//! reduced KKT system. Independent of Clarabel end to end, which is what
//! makes it usable as a cross-solver oracle. Intended for problems up to a
//! few hundred variables; the sparse backend is the production path.

use nalgebra::{DMatrix, DVector};

use super::{QpBackend, QpSolution, QpStatus, QuadraticProgram, SolveSettings};

#[derive(Debug, Clone, Default)]
pub struct DenseIpmBackend;

const REG: f64 = 1e-10;

impl QpBackend for DenseIpmBackend {
    fn solve(&self, qp: &QuadraticProgram, settings: &SolveSettings) -> QpSolution {
        let n = qp.num_vars();
        let me = qp.num_eq();
        let mi = qp.num_ineq();

        let p = DMatrix::from_fn(n, n, {
            let dense = qp.quad_dense();
            move |i, j| dense[i][j]
        });
        let q = DVector::from_column_slice(qp.lin_cost());
        let a = triplet_dense(&qp.eq.entries, me, n);
        let b = DVector::from_column_slice(&qp.eq_rhs);
        let g = triplet_dense(&qp.ineq.entries, mi, n);
        let h = DVector::from_column_slice(&qp.ineq_rhs);

        if mi == 0 {
            return solve_equality_qp(qp, &p, &q, &a, &b);
        }

        let scale = 1.0
            + q.amax().max(if me > 0 { b.amax() } else { 0.0 })
                .max(h.amax());
        let tol = settings.tol * scale;

        // start strictly interior in (s, z)
        let mut x = match settings.warm_start {
            Some(ref w) if w.len() == n => DVector::from_column_slice(w),
            _ => DVector::zeros(n),
        };
        let mut y = DVector::zeros(me);
        let gx = &g * &x;
        let mut s = DVector::from_fn(mi, |i, _| (h[i] - gx[i]).max(1.0));
        let mut z = DVector::from_element(mi, 1.0);

        let mut status = QpStatus::MaxIter {
            backend: "dense-ipm".into(),
        };

        for _ in 0..settings.max_iter {
            let r_dual = &p * &x + &q + a.transpose() * &y + g.transpose() * &z;
            let r_eq = &a * &x - &b;
            let r_ineq = &g * &x + &s - &h;
            let mu = s.dot(&z) / mi as f64;

            let worst = r_dual
                .amax()
                .max(if me > 0 { r_eq.amax() } else { 0.0 })
                .max(r_ineq.amax())
                .max(mu);
            if worst <= tol {
                status = QpStatus::Optimal;
                break;
            }
            if !worst.is_finite() || worst > 1e14 {
                status = QpStatus::Numerical {
                    backend: "dense-ipm diverged".into(),
                };
                break;
            }
            if y.amax().max(z.amax()) > 1e13 {
                status = QpStatus::Infeasible {
                    backend: "dense-ipm dual blow-up".into(),
                };
                break;
            }

            // reduced KKT: [P + GᵀWG + δI, Aᵀ; A, −δI], W = diag(z/s)
            let dim = n + me;
            let mut kkt = DMatrix::zeros(dim, dim);
            kkt.view_mut((0, 0), (n, n)).copy_from(&p);
            let w: Vec<f64> = (0..mi).map(|i| z[i] / s[i]).collect();
            for i in 0..mi {
                let gi = g.row(i);
                for c1 in 0..n {
                    let v1 = gi[c1];
                    if v1 == 0.0 {
                        continue;
                    }
                    for c2 in 0..n {
                        let v2 = gi[c2];
                        if v2 != 0.0 {
                            kkt[(c1, c2)] += w[i] * v1 * v2;
                        }
                    }
                }
            }
            for i in 0..n {
                kkt[(i, i)] += REG;
            }
            if me > 0 {
                kkt.view_mut((n, 0), (me, n)).copy_from(&a);
                kkt.view_mut((0, n), (n, me)).copy_from(&a.transpose());
                for i in 0..me {
                    kkt[(n + i, n + i)] = -REG;
                }
            }
            let lu = kkt.lu();

            let solve_dir = |rc: &DVector<f64>| -> Option<(DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>)> {
                // rc is the complementarity right-hand side: Z ds + S dz = rc
                let mut rhs = DVector::zeros(dim);
                let mut top = -&r_dual;
                // Gᵀ(W r_ineq + S⁻¹ rc)
                for i in 0..mi {
                    let coeff = w[i] * r_ineq[i] + rc[i] / s[i];
                    for c in 0..n {
                        let v = g[(i, c)];
                        if v != 0.0 {
                            top[c] -= coeff * v;
                        }
                    }
                }
                rhs.rows_mut(0, n).copy_from(&top);
                if me > 0 {
                    rhs.rows_mut(n, me).copy_from(&(-&r_eq));
                }
                let sol = lu.solve(&rhs)?;
                let dx = sol.rows(0, n).into_owned();
                let dy = if me > 0 {
                    sol.rows(n, me).into_owned()
                } else {
                    DVector::zeros(0)
                };
                let gdx = &g * &dx;
                let ds = -&r_ineq - &gdx;
                let dz = DVector::from_fn(mi, |i, _| (rc[i] - z[i] * ds[i]) / s[i]);
                Some((dx, dy, ds, dz))
            };

            // predictor
            let rc_aff = DVector::from_fn(mi, |i, _| -s[i] * z[i]);
            let Some((dx_a, dy_a, ds_a, dz_a)) = solve_dir(&rc_aff) else {
                status = QpStatus::Numerical {
                    backend: "dense-ipm singular KKT".into(),
                };
                break;
            };
            let alpha_aff = step_length(&s, &ds_a, &z, &dz_a, 1.0);
            let mu_aff = {
                let sa = &s + &ds_a * alpha_aff;
                let za = &z + &dz_a * alpha_aff;
                sa.dot(&za) / mi as f64
            };
            let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

            // corrector
            let rc = DVector::from_fn(mi, |i, _| -s[i] * z[i] + sigma * mu - ds_a[i] * dz_a[i]);
            let Some((dx, dy, ds, dz)) = solve_dir(&rc) else {
                status = QpStatus::Numerical {
                    backend: "dense-ipm singular KKT".into(),
                };
                break;
            };
            let _ = (dx_a, dy_a);

            let alpha = step_length(&s, &ds, &z, &dz, 0.99);
            x += &dx * alpha;
            y += &dy * alpha;
            s += &ds * alpha;
            z += &dz * alpha;
        }

        if !status.is_optimal() {
            return QpSolution::failed(status, n, me, mi);
        }
        let xv: Vec<f64> = x.iter().cloned().collect();
        QpSolution {
            objective: qp.objective_at(&xv),
            x: xv,
            y_eq: y.iter().cloned().collect(),
            y_ineq: z.iter().map(|v| v.max(0.0)).collect(),
            status,
            kkt: Default::default(),
        }
    }

    fn name(&self) -> &'static str {
        "dense-ipm"
    }
}

fn triplet_dense(entries: &[(usize, usize, f64)], rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for &(r, c, v) in entries {
        m[(r, c)] += v;
    }
    m
}

fn step_length(s: &DVector<f64>, ds: &DVector<f64>, z: &DVector<f64>, dz: &DVector<f64>, frac: f64) -> f64 {
    let mut alpha: f64 = 1.0;
    for i in 0..s.len() {
        if ds[i] < 0.0 {
            alpha = alpha.min(-s[i] / ds[i] * frac);
        }
        if dz[i] < 0.0 {
            alpha = alpha.min(-z[i] / dz[i] * frac);
        }
    }
    alpha.min(1.0)
}

/// Equality-constrained QP: one saddle-point solve.
fn solve_equality_qp(
    qp: &QuadraticProgram,
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> QpSolution {
    let n = qp.num_vars();
    let me = qp.num_eq();
    let dim = n + me;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(p);
    for i in 0..n {
        kkt[(i, i)] += REG;
    }
    if me > 0 {
        kkt.view_mut((n, 0), (me, n)).copy_from(a);
        kkt.view_mut((0, n), (n, me)).copy_from(&a.transpose());
        for i in 0..me {
            kkt[(n + i, n + i)] = -REG;
        }
    }
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(&(-q));
    if me > 0 {
        rhs.rows_mut(n, me).copy_from(b);
    }
    match kkt.lu().solve(&rhs) {
        Some(sol) => {
            let x: Vec<f64> = sol.rows(0, n).iter().cloned().collect();
            QpSolution {
                objective: qp.objective_at(&x),
                x,
                y_eq: sol.rows(n, me).iter().cloned().collect(),
                y_ineq: vec![],
                status: QpStatus::Optimal,
                kkt: Default::default(),
            }
        }
        None => QpSolution::failed(
            QpStatus::Numerical {
                backend: "dense-ipm singular equality KKT".into(),
            },
            n,
            me,
            0,
        ),
    }
}
