//! Dense convex quadratic programming.
//!
//! Solves
//!
//! ```text
//! minimize    1/2 z'Pz + q'z
//! subject to  A_eq z  = b_eq
//!             A_in z <= b_in
//! ```
//!
//! with an ADMM iteration on the equilibrated problem, followed by an
//! active-set polish that solves the reduced KKT system directly. The polish
//! is what brings KKT residuals down to the 1e-8 level; ADMM only has to
//! identify the active set.

mod admm;
mod polish;
mod scaling;

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("P is not symmetric (asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("problem data contains non-finite values")]
    NonFinite,
    #[error("the KKT matrix could not be factored")]
    Factorization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
}

impl QuadraticProgram {
    /// Unconstrained problem; add rows with the `with_*` builders.
    pub fn new(p: DMatrix<f64>, q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            p,
            q,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
        }
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.dim();
        if self.p.shape() != (n, n) {
            return Err(QpError::Dimension(format!("P is {:?}, expected {n}x{n}", self.p.shape())));
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return Err(QpError::Dimension("equality block".into()));
        }
        if self.a_in.ncols() != n || self.a_in.nrows() != self.b_in.len() {
            return Err(QpError::Dimension("inequality block".into()));
        }
        let finite = |s: &[f64]| s.iter().all(|v| v.is_finite());
        if !(finite(self.p.as_slice())
            && finite(self.q.as_slice())
            && finite(self.a_eq.as_slice())
            && finite(self.b_eq.as_slice())
            && finite(self.a_in.as_slice())
            && finite(self.b_in.as_slice()))
        {
            return Err(QpError::NonFinite);
        }
        let asym = (&self.p - self.p.transpose()).amax();
        if asym > 1e-12 * self.p.amax().max(1.0) {
            return Err(QpError::Asymmetric(asym));
        }
        Ok(())
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.p * z)) + self.q.dot(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct QpSettings {
    pub max_iter: usize,
    /// ADMM termination tolerances before the first polish attempt.
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Required KKT residual (infinity norm, absolute) for `Optimal`.
    pub eps_kkt: f64,
    pub eps_infeasible: f64,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub adaptive_rho: bool,
    pub scaling_iters: usize,
    pub polish: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            eps_abs: 1e-5,
            eps_rel: 1e-5,
            eps_kkt: 1e-8,
            eps_infeasible: 1e-6,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adaptive_rho: true,
            scaling_iters: 15,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

/// KKT violation measures, each an infinity norm.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct KktResiduals {
    /// `Pz + q + A_eq'y_eq + A_in'y_in`
    pub stationarity: f64,
    /// Equality error and inequality violation.
    pub primal: f64,
    /// Negative part of `y_in`.
    pub dual: f64,
    /// `max |y_in,i (b_in - A_in z)_i|`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

pub fn kkt_residuals(
    qp: &QuadraticProgram,
    z: &DVector<f64>,
    y_eq: &DVector<f64>,
    y_in: &DVector<f64>,
) -> KktResiduals {
    let grad = &qp.p * z + &qp.q + qp.a_eq.tr_mul(y_eq) + qp.a_in.tr_mul(y_in);
    let eq = &qp.a_eq * z - &qp.b_eq;
    let slack = &qp.b_in - &qp.a_in * z;
    let primal = eq
        .iter()
        .map(|v| v.abs())
        .chain(slack.iter().map(|s| (-s).max(0.0)))
        .fold(0.0, f64::max);
    KktResiduals {
        stationarity: grad.amax(),
        primal,
        dual: y_in.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max),
        complementarity: y_in
            .iter()
            .zip(slack.iter())
            .map(|(y, s)| (y * s).abs())
            .fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub y_eq: DVector<f64>,
    pub y_in: DVector<f64>,
    pub status: QpStatus,
    pub residuals: KktResiduals,
    /// ADMM iterations performed.
    pub iterations: usize,
    pub polished: bool,
    /// Farkas-type certificate `(y_eq, y_in)` stacked, when infeasible.
    pub certificate: Option<DVector<f64>>,
}

impl QpSolution {
    pub fn objective(&self, qp: &QuadraticProgram) -> f64 {
        qp.objective(&self.z)
    }

    /// Primal minus Lagrangian dual objective at the returned pair.
    pub fn duality_gap(&self, qp: &QuadraticProgram) -> f64 {
        let pz = &qp.p * &self.z;
        let primal = 0.5 * self.z.dot(&pz) + qp.q.dot(&self.z);
        let dual = -0.5 * self.z.dot(&pz) - qp.b_eq.dot(&self.y_eq) - qp.b_in.dot(&self.y_in);
        primal - dual
    }

    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            z: self.z.clone(),
            y_eq: self.y_eq.clone(),
            y_in: self.y_in.clone(),
        }
    }
}

/// Primal and dual starting point for [`solve_qp_warm`].
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub z: DVector<f64>,
    pub y_eq: DVector<f64>,
    pub y_in: DVector<f64>,
}

pub fn solve_qp(qp: &QuadraticProgram, settings: &QpSettings) -> Result<QpSolution, QpError> {
    solve_qp_warm(qp, settings, None)
}

pub fn solve_qp_warm(
    qp: &QuadraticProgram,
    settings: &QpSettings,
    warm: Option<&WarmStart>,
) -> Result<QpSolution, QpError> {
    qp.validate()?;
    if let Some(w) = warm {
        if w.z.len() != qp.dim() || w.y_eq.len() != qp.b_eq.len() || w.y_in.len() != qp.b_in.len() {
            return Err(QpError::Dimension("warm start".into()));
        }
    }
    let scaled = scaling::ScaledProblem::new(qp, settings.scaling_iters);
    let mut solver = admm::Admm::new(&scaled, settings, warm)?;

    let mut eps = (settings.eps_abs, settings.eps_rel);
    let mut best: Option<QpSolution> = None;
    loop {
        let outcome = solver.run(eps.0, eps.1)?;
        let (z, y_eq, y_in) = solver.unscaled();
        let iterations = solver.iterations();
        match outcome {
            admm::Outcome::Infeasible(cert) => {
                let residuals = kkt_residuals(qp, &z, &y_eq, &y_in);
                return Ok(QpSolution {
                    z,
                    y_eq,
                    y_in,
                    status: QpStatus::Infeasible,
                    residuals,
                    iterations,
                    polished: false,
                    certificate: Some(cert),
                });
            }
            admm::Outcome::Converged | admm::Outcome::MaxIterations => {}
        }

        let mut candidate = {
            let residuals = kkt_residuals(qp, &z, &y_eq, &y_in);
            QpSolution {
                z,
                y_eq,
                y_in,
                status: QpStatus::MaxIterations,
                residuals,
                iterations,
                polished: false,
                certificate: None,
            }
        };
        if settings.polish {
            if let Some((z, y_eq, y_in)) = polish::polish(qp, &candidate, settings.eps_kkt) {
                let residuals = kkt_residuals(qp, &z, &y_eq, &y_in);
                if residuals.max() < candidate.residuals.max() {
                    candidate = QpSolution {
                        z,
                        y_eq,
                        y_in,
                        residuals,
                        polished: true,
                        ..candidate
                    };
                }
            }
        }
        if candidate.residuals.max() <= settings.eps_kkt {
            candidate.status = QpStatus::Optimal;
            return Ok(candidate);
        }
        log::debug!(
            "qp: kkt {:.3e} after {} iterations at eps {:.1e}, tightening",
            candidate.residuals.max(),
            iterations,
            eps.0
        );
        if best
            .as_ref()
            .is_none_or(|b| candidate.residuals.max() < b.residuals.max())
        {
            best = Some(candidate);
        }
        if matches!(outcome, admm::Outcome::MaxIterations) || eps.0 <= 1e-13 {
            return Ok(best.unwrap());
        }
        eps = (eps.0 * 1e-2, eps.1 * 1e-2);
    }
}
