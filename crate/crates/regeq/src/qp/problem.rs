//! Standard-form convex quadratic programs.
//!
//! Every solve in this crate goes through one standard form:
//!
//! ```text
//!   minimize    1/2 xᵀPx + qᵀx
//!   subject to  A x  = b          (equality rows)
//!               G x <= h          (inequality rows)
//! ```
//!
//! with P symmetric positive semidefinite. Duals follow the Lagrangian
//! `L = 1/2 xᵀPx + qᵀx + y_eqᵀ(Ax − b) + y_ineqᵀ(Gx − h)` with
//! `y_ineq >= 0`; market prices such as the balance dual μ are the
//! *negated* equality multipliers (−y_eq), which makes them nonnegative
//! in normal operation.

use std::collections::HashMap;
use std::ops::Range;

use super::QpError;

/// Sparse matrix in triplet form; rows are built incrementally.
#[derive(Debug, Clone, Default)]
pub struct TripletMat {
    pub nrows: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl TripletMat {
    pub fn push_row(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>) -> usize {
        let row = self.nrows;
        for (col, v) in coeffs {
            if v != 0.0 {
                self.entries.push((row, col, v));
            }
        }
        self.nrows += 1;
        row
    }

    /// Dense row-major expansion, mainly for the dense backend and tests.
    pub fn to_dense(&self, ncols: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; ncols]; self.nrows];
        for &(r, c, v) in &self.entries {
            m[r][c] += v;
        }
        m
    }

    /// y += M x
    pub fn mul_acc(&self, x: &[f64], y: &mut [f64]) {
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
    }

    /// y += Mᵀ x
    pub fn mul_transpose_acc(&self, x: &[f64], y: &mut [f64]) {
        for &(r, c, v) in &self.entries {
            y[c] += v * x[r];
        }
    }
}

/// Named variable blocks, so callers can recover structured slices of the
/// primal solution without hand-tracking offsets.
#[derive(Debug, Clone, Default)]
pub struct VarMap {
    blocks: Vec<(String, Range<usize>)>,
    index: HashMap<String, usize>,
    len: usize,
}

impl VarMap {
    pub fn push(&mut self, name: impl Into<String>, len: usize) -> Range<usize> {
        let name = name.into();
        let range = self.len..self.len + len;
        self.index.insert(name.clone(), self.blocks.len());
        self.blocks.push((name, range.clone()));
        self.len += len;
        range
    }

    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        self.index.get(name).map(|&i| self.blocks[i].1.clone())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&str, Range<usize>)> {
        self.blocks.iter().map(|(n, r)| (n.as_str(), r.clone()))
    }
}

/// A convex QP in the crate-wide standard form.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    num_vars: usize,
    /// Upper-triangle triplets of P (duplicates are summed).
    quad: Vec<(usize, usize, f64)>,
    lin: Vec<f64>,
    pub eq: TripletMat,
    pub eq_rhs: Vec<f64>,
    pub ineq: TripletMat,
    pub ineq_rhs: Vec<f64>,
    pub vars: VarMap,
}

impl QuadraticProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            quad: Vec::new(),
            lin: vec![0.0; num_vars],
            eq: TripletMat::default(),
            eq_rhs: Vec::new(),
            ineq: TripletMat::default(),
            ineq_rhs: Vec::new(),
            vars: VarMap::default(),
        }
    }

    pub fn with_vars(vars: VarMap) -> Self {
        let n = vars.len();
        let mut qp = Self::new(n);
        qp.vars = vars;
        qp
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_eq(&self) -> usize {
        self.eq.nrows
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq.nrows
    }

    /// Adds `coeff · x_i x_j` to the objective (handles the 1/2 convention
    /// and symmetry internally).
    pub fn add_quad_cost(&mut self, i: usize, j: usize, coeff: f64) {
        assert!(i < self.num_vars && j < self.num_vars, "quad index out of range");
        if coeff == 0.0 {
            return;
        }
        if i == j {
            self.quad.push((i, i, 2.0 * coeff));
        } else {
            self.quad.push((i.min(j), i.max(j), coeff));
        }
    }

    /// Adds `coeff · x_i` to the objective.
    pub fn add_lin_cost(&mut self, i: usize, coeff: f64) {
        self.lin[i] += coeff;
    }

    /// Appends an equality row `Σ coeffs · x = rhs`; returns its row index.
    pub fn add_eq(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> usize {
        let row = self.eq.push_row(coeffs);
        self.eq_rhs.push(rhs);
        row
    }

    /// Appends an inequality row `Σ coeffs · x <= rhs`; returns its row index.
    pub fn add_ineq(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> usize {
        let row = self.ineq.push_row(coeffs);
        self.ineq_rhs.push(rhs);
        row
    }

    /// Objective `1/2 xᵀPx + qᵀx` at a point.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        for &(i, j, p) in &self.quad {
            if i == j {
                v += 0.5 * p * x[i] * x[i];
            } else {
                v += p * x[i] * x[j];
            }
        }
        for (i, &q) in self.lin.iter().enumerate() {
            v += q * x[i];
        }
        v
    }

    /// y += P x (symmetric expansion of the stored upper triangle).
    pub fn quad_mul_acc(&self, x: &[f64], y: &mut [f64]) {
        for &(i, j, p) in &self.quad {
            if i == j {
                y[i] += p * x[i];
            } else {
                y[i] += p * x[j];
                y[j] += p * x[i];
            }
        }
    }

    pub fn lin_cost(&self) -> &[f64] {
        &self.lin
    }

    /// Upper-triangle triplets of P with duplicates summed, sorted by (col, row).
    pub fn quad_upper_csc_order(&self) -> Vec<(usize, usize, f64)> {
        let mut map: HashMap<(usize, usize), f64> = HashMap::new();
        for &(i, j, v) in &self.quad {
            *map.entry((i, j)).or_insert(0.0) += v;
        }
        let mut out: Vec<(usize, usize, f64)> = map.into_iter().map(|((i, j), v)| (i, j, v)).collect();
        out.sort_by_key(|&(i, j, _)| (j, i));
        out
    }

    /// Dense P, for the dense backend and the debug-mode PSD check.
    pub fn quad_dense(&self) -> Vec<Vec<f64>> {
        let n = self.num_vars;
        let mut m = vec![vec![0.0; n]; n];
        for &(i, j, v) in &self.quad {
            m[i][j] += v;
            if i != j {
                m[j][i] += v;
            }
        }
        m
    }

    /// Structural validation: dimension consistency always, and (in debug
    /// builds, for small problems) an eigenvalue floor on P.
    pub fn validate(&self) -> Result<(), QpError> {
        if self.lin.len() != self.num_vars
            || self.eq_rhs.len() != self.eq.nrows
            || self.ineq_rhs.len() != self.ineq.nrows
        {
            return Err(QpError::DimensionMismatch);
        }
        for &(i, j, _) in &self.quad {
            if i > j || j >= self.num_vars {
                return Err(QpError::DimensionMismatch);
            }
        }
        for &(_, c, _) in self.eq.entries.iter().chain(self.ineq.entries.iter()) {
            if c >= self.num_vars {
                return Err(QpError::DimensionMismatch);
            }
        }
        #[cfg(debug_assertions)]
        if self.num_vars <= 400 {
            let dense = self.quad_dense();
            let mat = nalgebra::DMatrix::from_fn(self.num_vars, self.num_vars, |i, j| dense[i][j]);
            let eig = mat.symmetric_eigenvalues();
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            if min < -1e-8 * (1.0 + eig.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()))) {
                return Err(QpError::NotPsd { min_eigenvalue: min });
            }
        }
        Ok(())
    }
}
