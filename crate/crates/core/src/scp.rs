//! Penalized prox-convex trajectory optimization.
//!
//! The nonconvex feasibility problem is replaced by the exact penalty
//!
//! ```text
//! J(Z) = w_dyn * sum_k |x_k+1 - Phi(x_k, u_k, u_k+1)|_1 + w_stl * max(0, eps - Gamma(Z))
//! ```
//!
//! where `Gamma` is the smooth robustness of the formula at the first dense
//! sample and `eps >= 0` is an optional robustness margin. Each iteration
//! linearizes the defects and `Gamma` at the current iterate, adds a proximal
//! term `w_ptr/2 |Z - Z^j|^2`, slack-reformulates the 1-norm and hinge, and
//! solves the resulting QP. The proximal weight adapts with a trust-ratio
//! test on actual versus predicted decrease.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::DynamicsModel;
use crate::gmsr::{GmsrConfig, GmsrError};
use crate::qp::{solve_qp_warm, QpError, QpSettings, QpStatus, QuadraticProgram, WarmStart};
use crate::robustness::{Evaluator, RobustnessError};
use crate::stl::Formula;
use crate::transcription::{
    discretize, initial_guess, DecisionVector, DenseTrajectory, Discretization, GridSpec,
    TranscriptionError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScpError {
    #[error(transparent)]
    Transcription(#[from] TranscriptionError),
    #[error(transparent)]
    Robustness(#[from] RobustnessError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Gmsr(#[from] GmsrError),
    #[error("formula uses channel `{0}`, which the dynamics model does not provide")]
    UnknownChannel(String),
    #[error("boundary state has length {found}, expected {expected}")]
    BoundaryDimension { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    pub w_dyn: f64,
    pub w_stl: f64,
    /// Target robustness `eps` in the hinge `max(0, eps - Gamma)`.
    pub margin: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            w_dyn: 100.0,
            w_stl: 100.0,
            margin: 0.0,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<(), ScpError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.w_dyn) || !pos(self.w_stl) {
            return Err(ScpError::Config("penalty weights must be positive".into()));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(ScpError::Config("margin must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ProxConfig {
    pub w_init: f64,
    pub gamma_up: f64,
    pub gamma_down: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// Reject below this trust ratio.
    pub ratio_reject: f64,
    /// Relax the proximal weight above this trust ratio.
    pub ratio_relax: f64,
    pub max_iters: usize,
    /// Step tolerance, scaled by `1 + |Z|`.
    pub eps_stat: f64,
    pub eps_pen: f64,
}

impl Default for ProxConfig {
    fn default() -> Self {
        Self {
            w_init: 1.0,
            gamma_up: 3.0,
            gamma_down: 0.5,
            w_min: 1e-4,
            w_max: 1e6,
            ratio_reject: 0.1,
            ratio_relax: 0.7,
            max_iters: 50,
            eps_stat: 1e-6,
            eps_pen: 1e-6,
        }
    }
}

impl ProxConfig {
    pub fn validate(&self) -> Result<(), ScpError> {
        if !(self.gamma_up > 1.0 && self.gamma_down > 0.0 && self.gamma_down < 1.0) {
            return Err(ScpError::Config("need gamma_up > 1 > gamma_down > 0".into()));
        }
        if !(self.w_min > 0.0 && self.w_min <= self.w_init && self.w_init <= self.w_max) {
            return Err(ScpError::Config("need 0 < w_min <= w_init <= w_max".into()));
        }
        if !(0.0 <= self.ratio_reject && self.ratio_reject < self.ratio_relax) {
            return Err(ScpError::Config("need 0 <= ratio_reject < ratio_relax".into()));
        }
        if self.max_iters == 0 || !(self.eps_stat > 0.0) || !(self.eps_pen > 0.0) {
            return Err(ScpError::Config("tolerances and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// Fixed-endpoint trajectory problem over a dynamics model.
pub struct TrajectoryProblem {
    pub model: Box<dyn DynamicsModel>,
    pub grid: GridSpec,
    /// Specification enforced at the first dense sample; `None` leaves only
    /// the dynamics.
    pub formula: Option<Formula>,
    pub x_init: DVector<f64>,
    pub x_final: DVector<f64>,
    pub gmsr: GmsrConfig,
}

impl TrajectoryProblem {
    pub fn validate(&self) -> Result<(), ScpError> {
        self.grid.validate()?;
        self.gmsr.validate()?;
        let n = self.model.state_dim();
        for x in [&self.x_init, &self.x_final] {
            if x.len() != n {
                return Err(ScpError::BoundaryDimension {
                    expected: n,
                    found: x.len(),
                });
            }
        }
        if let Some(f) = &self.formula {
            let known = self.model.channels();
            if let Some(ch) = f.channels().into_iter().find(|c| !known.contains(c)) {
                return Err(ScpError::UnknownChannel(ch));
            }
            self.grid.check_commensurate(&f.intervals())?;
        }
        Ok(())
    }

    /// Decision-vector indices pinned by the boundary conditions, with values.
    pub fn boundary_fixes(&self) -> Vec<(usize, f64)> {
        let n = self.model.state_dim();
        let last = (self.grid.nodes - 1) * n;
        (0..n)
            .map(|i| (i, self.x_init[i]))
            .chain((0..n).map(|i| (last + i, self.x_final[i])))
            .collect()
    }

    pub fn initial_guess(&self) -> DecisionVector {
        initial_guess(self.model.as_ref(), &self.x_init, &self.x_final, &self.grid)
    }

    pub fn decision(&self, z: DVector<f64>) -> Result<DecisionVector, ScpError> {
        Ok(DecisionVector::from_vec(
            z,
            self.grid.nodes,
            self.model.state_dim(),
            self.model.control_dim(),
        )?)
    }
}

/// Penalty terms at one decision vector.
#[derive(Debug, Clone)]
pub struct PenaltyValue {
    pub j_nl: f64,
    pub defect_l1: f64,
    pub defect_max: f64,
    /// Smooth robustness at the first dense sample.
    pub gamma: Option<f64>,
}

/// Everything the subproblem needs at the current iterate, plus the
/// penalty value there.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub z: DVector<f64>,
    /// Stacked defects `d(Z^j)`.
    pub defects: DVector<f64>,
    pub defect_jacobian: DMatrix<f64>,
    /// `(Gamma(Z^j), dGamma/dZ)`.
    pub gamma: Option<(f64, DVector<f64>)>,
    /// Smallest aggregator input magnitude seen while evaluating `Gamma`.
    pub min_abs_input: f64,
    pub dense: DenseTrajectory,
}

impl Linearization {
    pub fn penalty(&self, cfg: &PenaltyConfig) -> PenaltyValue {
        let defect_l1 = self.defects.lp_norm(1);
        let hinge = self.gamma.as_ref().map_or(0.0, |(g, _)| (cfg.margin - g).max(0.0));
        PenaltyValue {
            j_nl: cfg.w_dyn * defect_l1 + cfg.w_stl * hinge,
            defect_l1,
            defect_max: if self.defects.is_empty() { 0.0 } else { self.defects.amax() },
            gamma: self.gamma.as_ref().map(|(g, _)| *g),
        }
    }

    /// Penalty with defects and `Gamma` replaced by their first-order
    /// models about `Z^j`.
    pub fn model_penalty(&self, z: &DVector<f64>, cfg: &PenaltyConfig) -> f64 {
        let dz = z - &self.z;
        let d_lin = &self.defects + &self.defect_jacobian * &dz;
        let hinge = self
            .gamma
            .as_ref()
            .map_or(0.0, |(g, grad)| (cfg.margin - g - grad.dot(&dz)).max(0.0));
        cfg.w_dyn * d_lin.lp_norm(1) + cfg.w_stl * hinge
    }

    /// Gradient of the penalty where it is differentiable (no zero defect
    /// component, `Gamma != eps`).
    pub fn penalty_gradient(&self, cfg: &PenaltyConfig) -> DVector<f64> {
        let signs = self.defects.map(|d| d.signum() * (d != 0.0) as u8 as f64);
        let mut g = self.defect_jacobian.tr_mul(&signs) * cfg.w_dyn;
        if let Some((gamma, grad)) = &self.gamma {
            if *gamma < cfg.margin {
                g -= grad * cfg.w_stl;
            }
        }
        g
    }
}

fn discretization_to_linearization(
    problem: &TrajectoryProblem,
    z: &DecisionVector,
    disc: Discretization,
    with_gradient: bool,
) -> Result<Linearization, ScpError> {
    let mut min_abs_input = f64::INFINITY;
    let gamma = match &problem.formula {
        Some(f) => {
            let signal = disc.dense.to_signal();
            let mut ev = Evaluator::new(f, &signal, problem.gmsr)?;
            if with_gradient {
                let r = ev.robustness(0)?;
                min_abs_input = r.min_abs_input;
                Some((r.value, disc.dense.pull_back(&r.gradient)))
            } else {
                Some((ev.value(0)?, DVector::zeros(0)))
            }
        }
        None => None,
    };
    Ok(Linearization {
        z: z.as_vector().clone(),
        defects: disc.stacked_defects(),
        defect_jacobian: disc.defect_jacobian,
        gamma,
        min_abs_input,
        dense: disc.dense,
    })
}

/// Defects, robustness and their derivatives at `z`.
pub fn linearize(problem: &TrajectoryProblem, z: &DecisionVector) -> Result<Linearization, ScpError> {
    let disc = discretize(problem.model.as_ref(), z, &problem.grid)?;
    discretization_to_linearization(problem, z, disc, true)
}

/// Exact penalty value at `z`.
pub fn penalty_value(
    problem: &TrajectoryProblem,
    z: &DecisionVector,
    cfg: &PenaltyConfig,
) -> Result<PenaltyValue, ScpError> {
    let disc = discretize(problem.model.as_ref(), z, &problem.grid)?;
    Ok(discretization_to_linearization(problem, z, disc, false)?.penalty(cfg))
}

/// Convex subproblem over `(Z, s, sigma)`: `s` bounds the linearized defects
/// componentwise in absolute value and `sigma` the linearized hinge.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub qp: QuadraticProgram,
    pub z_dim: usize,
    pub n_slack: usize,
    pub has_hinge: bool,
    /// Objective constant dropped from the QP: `w_ptr/2 |Z^j|^2`.
    pub constant: f64,
    lin_z: DVector<f64>,
    d_const: DVector<f64>,
    jac: DMatrix<f64>,
    hinge_const: f64,
    hinge_grad: DVector<f64>,
}

impl Subproblem {
    /// Full QP variable for a given `Z` with slacks at their smallest
    /// feasible values.
    pub fn lift(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(self.qp.dim());
        v.rows_mut(0, self.z_dim).copy_from(z);
        let d_lin = &self.jac * z + &self.d_const;
        for i in 0..self.n_slack {
            v[self.z_dim + i] = d_lin[i].abs();
        }
        if self.has_hinge {
            v[self.z_dim + self.n_slack] = (self.hinge_const - self.hinge_grad.dot(z)).max(0.0);
        }
        v
    }

    /// Subproblem objective (including the dropped constant) at `Z`.
    pub fn objective_at(&self, z: &DVector<f64>) -> f64 {
        self.qp.objective(&self.lift(z)) + self.constant
    }

    pub fn anchor(&self) -> &DVector<f64> {
        &self.lin_z
    }
}

pub fn build_subproblem(
    lin: &Linearization,
    w_ptr: f64,
    cfg: &PenaltyConfig,
    fixes: &[(usize, f64)],
) -> Result<Subproblem, ScpError> {
    let nz = lin.z.len();
    let nd = lin.defects.len();
    if lin.defect_jacobian.shape() != (nd, nz) {
        return Err(ScpError::Config(format!(
            "defect Jacobian is {:?}, expected ({nd}, {nz})",
            lin.defect_jacobian.shape()
        )));
    }
    if let Some((_, g)) = &lin.gamma {
        if g.len() != nz {
            return Err(ScpError::Config("robustness gradient has the wrong length".into()));
        }
    }
    if let Some((i, _)) = fixes.iter().find(|(i, _)| *i >= nz) {
        return Err(ScpError::Config(format!("boundary index {i} out of range")));
    }
    let has_hinge = lin.gamma.is_some();
    let nv = nz + nd + has_hinge as usize;

    let mut p = DMatrix::zeros(nv, nv);
    for i in 0..nz {
        p[(i, i)] = w_ptr;
    }
    let mut q = DVector::zeros(nv);
    q.rows_mut(0, nz).copy_from(&(&lin.z * -w_ptr));
    q.rows_mut(nz, nd).fill(cfg.w_dyn);

    // d_lin(Z) = J Z + d_const
    let d_const = &lin.defects - &lin.defect_jacobian * &lin.z;
    let m_in = 2 * nd + if has_hinge { 2 } else { 0 };
    let mut a_in = DMatrix::zeros(m_in, nv);
    let mut b_in = DVector::zeros(m_in);
    for i in 0..nd {
        let row = lin.defect_jacobian.row(i);
        // J Z - s <= -d_const
        a_in.view_mut((i, 0), (1, nz)).copy_from(&row);
        a_in[(i, nz + i)] = -1.0;
        b_in[i] = -d_const[i];
        // -J Z - s <= d_const
        a_in.view_mut((nd + i, 0), (1, nz)).copy_from(&(-row));
        a_in[(nd + i, nz + i)] = -1.0;
        b_in[nd + i] = d_const[i];
    }
    let (mut hinge_const, mut hinge_grad) = (0.0, DVector::zeros(nz));
    if let Some((gamma, grad)) = &lin.gamma {
        let sig = nz + nd;
        q[sig] = cfg.w_stl;
        // -sigma <= 0
        a_in[(2 * nd, sig)] = -1.0;
        // eps - Gamma - g'(Z - Z^j) <= sigma
        hinge_const = cfg.margin - gamma + grad.dot(&lin.z);
        hinge_grad = grad.clone();
        a_in.view_mut((2 * nd + 1, 0), (1, nz)).copy_from(&(-grad.transpose()));
        a_in[(2 * nd + 1, sig)] = -1.0;
        b_in[2 * nd + 1] = -hinge_const;
    }

    let mut a_eq = DMatrix::zeros(fixes.len(), nv);
    let mut b_eq = DVector::zeros(fixes.len());
    for (r, (i, v)) in fixes.iter().enumerate() {
        a_eq[(r, *i)] = 1.0;
        b_eq[r] = *v;
    }

    Ok(Subproblem {
        qp: QuadraticProgram::new(p, q)
            .with_equalities(a_eq, b_eq)
            .with_inequalities(a_in, b_in),
        z_dim: nz,
        n_slack: nd,
        has_hinge,
        constant: 0.5 * w_ptr * lin.z.norm_squared(),
        lin_z: lin.z.clone(),
        d_const,
        jac: lin.defect_jacobian.clone(),
        hinge_const,
        hinge_grad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    SubproblemFailure,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IterationRecord {
    /// Penalty at the iterate kept after this iteration.
    pub j_nl: f64,
    pub defect_l1: f64,
    pub gamma: Option<f64>,
    pub step_norm: f64,
    /// Proximal weight used for this iteration's subproblem.
    pub w_ptr: f64,
    pub trust_ratio: f64,
    pub accepted: bool,
    pub qp_iterations: usize,
    pub subproblem_ms: f64,
    pub discretization_ms: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: Vec<IterationRecord>,
    pub initial_j_nl: f64,
    pub final_j_nl: f64,
    pub final_gamma: Option<f64>,
    pub final_defect_max: f64,
    pub message: String,
}

pub struct SolveOutcome {
    pub z: DecisionVector,
    pub dense: DenseTrajectory,
    pub report: SolveReport,
}

pub fn prox_convex_solve(
    problem: &TrajectoryProblem,
    penalty: &PenaltyConfig,
    prox: &ProxConfig,
    qp: &QpSettings,
) -> Result<SolveOutcome, ScpError> {
    problem.validate()?;
    prox_convex_solve_from(problem, problem.initial_guess(), penalty, prox, qp)
}

/// Runs the prox-convex loop from a given starting point. The boundary
/// components of `z0` are overwritten with the boundary states.
pub fn prox_convex_solve_from(
    problem: &TrajectoryProblem,
    z0: DecisionVector,
    penalty: &PenaltyConfig,
    prox: &ProxConfig,
    qp_cfg: &QpSettings,
) -> Result<SolveOutcome, ScpError> {
    problem.validate()?;
    penalty.validate()?;
    prox.validate()?;
    let fixes = problem.boundary_fixes();
    let mut z = z0;
    for &(i, v) in &fixes {
        z.as_vector_mut()[i] = v;
    }

    let mut lin = linearize(problem, &z)?;
    let mut current = lin.penalty(penalty);
    let initial_j = current.j_nl;
    let mut w = prox.w_init;
    let mut records = Vec::new();
    let mut warm: Option<WarmStart> = None;
    let mut status = SolveStatus::MaxIterations;
    let mut message = String::from("iteration limit reached");

    for j in 0..prox.max_iters {
        let t0 = Instant::now();
        let sub = build_subproblem(&lin, w, penalty, &fixes)?;
        let warm_ok = warm.as_ref().filter(|ws| ws.z.len() == sub.qp.dim() && ws.y_in.len() == sub.qp.b_in.len());
        let sol = solve_qp_warm(&sub.qp, qp_cfg, warm_ok)?;
        let subproblem_ms = t0.elapsed().as_secs_f64() * 1e3;
        if sol.status != QpStatus::Optimal {
            status = SolveStatus::SubproblemFailure;
            message = format!(
                "subproblem {j} ended with status {:?}, KKT residual {:.3e}",
                sol.status,
                sol.residuals.max()
            );
            log::warn!("{message}");
            break;
        }
        warm = Some(sol.warm_start());

        let mut z_new = sol.z.rows(0, sub.z_dim).into_owned();
        for &(i, v) in &fixes {
            z_new[i] = v;
        }
        let step = (&z_new - &lin.z).norm();
        let predicted = current.j_nl - lin.model_penalty(&z_new, penalty);
        let stat_tol = prox.eps_stat * (1.0 + lin.z.norm());

        let t1 = Instant::now();
        let cand_z = problem.decision(z_new)?;
        let cand = linearize(problem, &cand_z)?;
        let discretization_ms = t1.elapsed().as_secs_f64() * 1e3;
        let cand_pen = cand.penalty(penalty);
        let actual = current.j_nl - cand_pen.j_nl;
        let ratio = if predicted > 0.0 { actual / predicted } else { f64::NAN };

        let stationary = step <= stat_tol && predicted <= prox.eps_pen;
        let accepted = stationary || ratio >= prox.ratio_reject;
        log::info!(
            "iter {j:3}: J {:.6e} -> {:.6e}, pred {:.3e}, ratio {:.3}, step {:.3e}, w {:.2e}, gamma {:?}{}",
            current.j_nl,
            cand_pen.j_nl,
            predicted,
            ratio,
            step,
            w,
            cand_pen.gamma,
            if accepted { "" } else { " (rejected)" }
        );
        let w_used = w;
        if accepted {
            if !stationary && ratio > prox.ratio_relax {
                w = (w * prox.gamma_down).max(prox.w_min);
            }
            z = cand_z;
            lin = cand;
            current = cand_pen;
        } else {
            w = (w * prox.gamma_up).min(prox.w_max);
        }
        records.push(IterationRecord {
            j_nl: current.j_nl,
            defect_l1: current.defect_l1,
            gamma: current.gamma,
            step_norm: step,
            w_ptr: w_used,
            trust_ratio: ratio,
            accepted,
            qp_iterations: sol.iterations,
            subproblem_ms,
            discretization_ms,
        });

        if stationary {
            status = SolveStatus::Converged;
            message = "stationary: step and predicted decrease below tolerance".into();
            break;
        }
        if accepted {
            let feasible = current.j_nl <= prox.eps_pen
                && current.gamma.is_none_or(|g| g >= 0.0)
                && current.defect_max <= prox.eps_pen;
            if feasible {
                status = SolveStatus::Converged;
                message = "penalty below tolerance with nonnegative robustness".into();
                break;
            }
            if actual.abs() <= prox.eps_pen && step <= stat_tol {
                status = SolveStatus::Converged;
                message = "penalty decrease and step below tolerance".into();
                break;
            }
        }
    }

    let report = SolveReport {
        status,
        iterations: records,
        initial_j_nl: initial_j,
        final_j_nl: current.j_nl,
        final_gamma: current.gamma,
        final_defect_max: current.defect_max,
        message,
    };
    Ok(SolveOutcome {
        z,
        dense: lin.dense,
        report,
    })
}
