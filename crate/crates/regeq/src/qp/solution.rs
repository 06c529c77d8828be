use serde::Serialize;

/// Terminal status of a QP solve. Anything other than `Optimal` carries the
/// backend's own status string for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum QpStatus {
    Optimal,
    Infeasible { backend: String },
    MaxIter { backend: String },
    Numerical { backend: String },
}

impl QpStatus {
    pub fn is_optimal(&self) -> bool {
        matches!(self, QpStatus::Optimal)
    }
}

impl std::fmt::Display for QpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QpStatus::Optimal => write!(f, "optimal"),
            QpStatus::Infeasible { backend } => write!(f, "infeasible ({backend})"),
            QpStatus::MaxIter { backend } => write!(f, "max-iterations ({backend})"),
            QpStatus::Numerical { backend } => write!(f, "numerical ({backend})"),
        }
    }
}

/// First-principles KKT residual summary (max norms on the unscaled problem).
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_eq: f64,
    pub primal_ineq: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_eq)
            .max(self.primal_ineq)
            .max(self.complementarity)
    }
}

/// Primal/dual solution of a standard-form QP.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Multipliers of the equality rows (free sign; prices are −y_eq).
    pub y_eq: Vec<f64>,
    /// Multipliers of the inequality rows, nonnegative when optimal.
    pub y_ineq: Vec<f64>,
    pub status: QpStatus,
    pub objective: f64,
    pub kkt: KktResiduals,
}

impl QpSolution {
    pub fn failed(status: QpStatus, n: usize, m_eq: usize, m_ineq: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y_eq: vec![0.0; m_eq],
            y_ineq: vec![0.0; m_ineq],
            status,
            objective: f64::NAN,
            kkt: KktResiduals::default(),
        }
    }
}
