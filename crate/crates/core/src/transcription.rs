//! Multiple-shooting transcription with first-order-hold controls.
//!
//! Each shooting interval `[t_k, t_k+1]` is integrated from the nodal state
//! `x_k` by `N` classical RK4 substeps, with the control linearly
//! interpolated between `u_k` and `u_k+1` at every stage time. The subnode
//! states of all intervals, flattened, form the dense grid of
//! `M = (K - 1) N + 1` samples on which temporal formulas are evaluated.
//!
//! Sensitivities are the exact derivatives of the discrete RK4 recursion with
//! respect to `(x_k, u_k, u_k+1)`, carried forward alongside the state.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::DynamicsModel;
use crate::signal::Signal;
use crate::stl::Interval;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TranscriptionError {
    #[error("grid needs at least 2 nodes, 1 substep and a positive final time")]
    BadGrid,
    #[error("decision vector has length {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("state became non-finite in interval {interval}, substep {substep}")]
    Divergence { interval: usize, substep: usize },
    #[error("time {t} lies outside the hold interval [{lo}, {hi}]")]
    OutsideInterval { t: f64, lo: f64, hi: f64 },
    #[error("interval endpoint {0} is not a multiple of the integration step")]
    Incommensurate(f64),
    #[error("interval end {0} exceeds the final time")]
    BeyondHorizon(f64),
}

/// Uniform node and substep layout of the horizon `[0, t_f]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub nodes: usize,
    pub substeps: usize,
    pub final_time: f64,
}

impl GridSpec {
    pub fn new(nodes: usize, substeps: usize, final_time: f64) -> Result<Self, TranscriptionError> {
        let g = Self {
            nodes,
            substeps,
            final_time,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), TranscriptionError> {
        if self.nodes < 2 || self.substeps < 1 || !(self.final_time > 0.0) || !self.final_time.is_finite() {
            return Err(TranscriptionError::BadGrid);
        }
        Ok(())
    }

    /// Node spacing `t_f / (K - 1)`.
    pub fn node_step(&self) -> f64 {
        self.final_time / (self.nodes - 1) as f64
    }

    /// Integration step `node_step / N`.
    pub fn substep(&self) -> f64 {
        self.node_step() / self.substeps as f64
    }

    pub fn node_time(&self, k: usize) -> f64 {
        self.final_time * k as f64 / (self.nodes - 1) as f64
    }

    /// Number of dense samples `(K - 1) N + 1`.
    pub fn dense_len(&self) -> usize {
        (self.nodes - 1) * self.substeps + 1
    }

    pub fn dense_time(&self, m: usize) -> f64 {
        self.final_time * m as f64 / (self.dense_len() - 1) as f64
    }

    pub fn time_tolerance(&self) -> f64 {
        1e-9 * self.final_time
    }

    /// Every endpoint must be a multiple of the integration step and no
    /// window may end past `t_f`.
    pub fn check_commensurate(&self, intervals: &[Interval]) -> Result<(), TranscriptionError> {
        let h = self.substep();
        let tol = self.time_tolerance();
        for iv in intervals {
            for t in [iv.lo(), iv.hi()] {
                if (t / h - (t / h).round()).abs() * h > tol {
                    return Err(TranscriptionError::Incommensurate(t));
                }
            }
            if iv.hi() > self.final_time + tol {
                return Err(TranscriptionError::BeyondHorizon(iv.hi()));
            }
        }
        Ok(())
    }
}

/// First-order hold between `u_k` (at `t_k`) and `u_next` (at `t_k + dt`).
pub fn foh_control(
    u_k: &DVector<f64>,
    u_next: &DVector<f64>,
    t_k: f64,
    dt: f64,
    t: f64,
) -> Result<DVector<f64>, TranscriptionError> {
    let tol = 1e-12 * (1.0 + t_k.abs() + dt);
    if t < t_k - tol || t > t_k + dt + tol {
        return Err(TranscriptionError::OutsideInterval {
            t,
            lo: t_k,
            hi: t_k + dt,
        });
    }
    let beta = (t - t_k) / dt;
    Ok(u_k * (1.0 - beta) + u_next * beta)
}

/// Stacked nodal variables `(x_1..x_K, u_1..u_K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    data: DVector<f64>,
    pub(crate) nodes: usize,
    state_dim: usize,
    control_dim: usize,
}

impl DecisionVector {
    pub fn zeros(nodes: usize, state_dim: usize, control_dim: usize) -> Self {
        Self {
            data: DVector::zeros(nodes * (state_dim + control_dim)),
            nodes,
            state_dim,
            control_dim,
        }
    }

    pub fn from_vec(
        data: DVector<f64>,
        nodes: usize,
        state_dim: usize,
        control_dim: usize,
    ) -> Result<Self, TranscriptionError> {
        let expected = nodes * (state_dim + control_dim);
        if data.len() != expected {
            return Err(TranscriptionError::Dimension {
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            data,
            nodes,
            state_dim,
            control_dim,
        })
    }

    pub fn from_nodes(states: &[DVector<f64>], controls: &[DVector<f64>]) -> Self {
        assert_eq!(states.len(), controls.len());
        let (n, m) = (states[0].len(), controls[0].len());
        let mut z = Self::zeros(states.len(), n, m);
        for k in 0..states.len() {
            z.set_state(k, &states[k]);
            z.set_control(k, &controls[k]);
        }
        z
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn as_vector_mut(&mut self) -> &mut DVector<f64> {
        &mut self.data
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }

    /// Offset of `x_k` in the stacked vector.
    pub fn state_offset(&self, k: usize) -> usize {
        k * self.state_dim
    }

    /// Offset of `u_k` in the stacked vector.
    pub fn control_offset(&self, k: usize) -> usize {
        self.nodes * self.state_dim + k * self.control_dim
    }

    pub fn state(&self, k: usize) -> DVector<f64> {
        self.data.rows(self.state_offset(k), self.state_dim).into_owned()
    }

    pub fn control(&self, k: usize) -> DVector<f64> {
        self.data.rows(self.control_offset(k), self.control_dim).into_owned()
    }

    pub fn set_state(&mut self, k: usize, x: &DVector<f64>) {
        let o = self.state_offset(k);
        self.data.rows_mut(o, self.state_dim).copy_from(x);
    }

    pub fn set_control(&mut self, k: usize, u: &DVector<f64>) {
        let o = self.control_offset(k);
        self.data.rows_mut(o, self.control_dim).copy_from(u);
    }
}

/// Subnode states of one shooting interval and their sensitivities.
#[derive(Debug, Clone)]
pub struct Arc {
    /// `x(t_k^i)` for `i = 0..=N`.
    pub states: Vec<DVector<f64>>,
    /// `d x(t_k^i) / d(x_k, u_k, u_k+1)`, each `n x (n + 2m)`.
    pub sensitivities: Vec<DMatrix<f64>>,
}

/// Integrates interval `k` with RK4 under FOH control.
pub fn integrate_interval(
    model: &dyn DynamicsModel,
    x_k: &DVector<f64>,
    u_k: &DVector<f64>,
    u_next: &DVector<f64>,
    k: usize,
    grid: &GridSpec,
) -> Result<Arc, TranscriptionError> {
    let (n, m) = (model.state_dim(), model.control_dim());
    let dt = grid.node_step();
    let h = grid.substep();
    let t_k = grid.node_time(k);

    // [0 | alpha I | beta I] maps the FOH weights onto the parameter block.
    let weights = |tau: f64| -> (DVector<f64>, DMatrix<f64>) {
        let beta = ((tau - t_k) / dt).clamp(0.0, 1.0);
        let u = u_k * (1.0 - beta) + u_next * beta;
        let mut e = DMatrix::zeros(m, n + 2 * m);
        for i in 0..m {
            e[(i, n + i)] = 1.0 - beta;
            e[(i, n + m + i)] = beta;
        }
        (u, e)
    };
    let stage = |tau: f64, x: &DVector<f64>, s: &DMatrix<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let (u, e) = weights(tau);
        let f = model.rhs(tau, x, &u);
        let ds = model.jac_x(tau, x, &u) * s + model.jac_u(tau, x, &u) * e;
        (f, ds)
    };

    let mut x = x_k.clone();
    let mut s = DMatrix::zeros(n, n + 2 * m);
    s.view_mut((0, 0), (n, n)).fill_with_identity();
    let mut states = Vec::with_capacity(grid.substeps + 1);
    let mut sens = Vec::with_capacity(grid.substeps + 1);
    states.push(x.clone());
    sens.push(s.clone());
    for i in 0..grid.substeps {
        let t = t_k + i as f64 * h;
        let (k1, d1) = stage(t, &x, &s);
        let (k2, d2) = stage(t + 0.5 * h, &(&x + &k1 * (0.5 * h)), &(&s + &d1 * (0.5 * h)));
        let (k3, d3) = stage(t + 0.5 * h, &(&x + &k2 * (0.5 * h)), &(&s + &d2 * (0.5 * h)));
        let (k4, d4) = stage(t + h, &(&x + &k3 * h), &(&s + &d3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        s += (d1 + d2 * 2.0 + d3 * 2.0 + d4) * (h / 6.0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(TranscriptionError::Divergence {
                interval: k,
                substep: i + 1,
            });
        }
        states.push(x.clone());
        sens.push(s.clone());
    }
    Ok(Arc {
        states,
        sensitivities: sens,
    })
}

/// Endpoint of an interval and its Jacobians.
#[derive(Debug, Clone)]
pub struct FlowMap {
    pub value: DVector<f64>,
    pub d_state: DMatrix<f64>,
    pub d_control: DMatrix<f64>,
    pub d_control_next: DMatrix<f64>,
}

pub fn flow_map(
    model: &dyn DynamicsModel,
    x_k: &DVector<f64>,
    u_k: &DVector<f64>,
    u_next: &DVector<f64>,
    k: usize,
    grid: &GridSpec,
) -> Result<FlowMap, TranscriptionError> {
    let arc = integrate_interval(model, x_k, u_k, u_next, k, grid)?;
    Ok(flow_from_arc(&arc, model.state_dim(), model.control_dim()))
}

fn flow_from_arc(arc: &Arc, n: usize, m: usize) -> FlowMap {
    let s = arc.sensitivities.last().unwrap();
    FlowMap {
        value: arc.states.last().unwrap().clone(),
        d_state: s.columns(0, n).into_owned(),
        d_control: s.columns(n, m).into_owned(),
        d_control_next: s.columns(n + m, m).into_owned(),
    }
}

/// The flattened dense trajectory.
///
/// Sample 0 belongs to interval 0; every later sample belongs to the interval
/// whose subnode produced it, so an interval boundary carries the integrated
/// value `x(t_k^N)` rather than the decision variable `x_k+1`.
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    /// Owning interval of each sample.
    pub owner: Vec<usize>,
    /// FOH weight of `u_k+1` in the control of each sample.
    pub hold_weight: Vec<f64>,
    /// `d xbar_m / d(x_k, u_k, u_k+1)` for the owning interval `k`.
    pub sensitivities: Vec<DMatrix<f64>>,
    pub channels: Vec<String>,
    pub(crate) nodes: usize,
}

impl DenseTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// States and controls as a signal over the model's channels.
    pub fn to_signal(&self) -> Signal {
        let mut data = Vec::with_capacity(self.len() * self.channels.len());
        for (x, u) in self.states.iter().zip(&self.controls) {
            data.extend(x.iter());
            data.extend(u.iter());
        }
        Signal::new(self.times.clone(), self.channels.clone(), data)
            .expect("integrated trajectory is finite and strictly increasing")
    }

    /// Chain rule from a gradient over the sample table (layout of
    /// [`to_signal`](Self::to_signal)) to a gradient over the decision vector.
    pub fn pull_back(&self, dense_grad: &[f64]) -> DVector<f64> {
        let n = self.states[0].len();
        let m = self.controls[0].len();
        let w = n + m;
        let z = DecisionVector::zeros(self.nodes, n, m);
        let mut out = DVector::zeros(z.len());
        for s in 0..self.len() {
            let row = &dense_grad[s * w..(s + 1) * w];
            if row.iter().all(|v| *v == 0.0) {
                continue;
            }
            let k = self.owner[s];
            let gx = DVector::from_column_slice(&row[..n]);
            let sens = &self.sensitivities[s];
            let back = sens.transpose() * &gx;
            let beta = self.hold_weight[s];
            let (xo, uo, un) = (z.state_offset(k), z.control_offset(k), z.control_offset(k + 1));
            for i in 0..n {
                out[xo + i] += back[i];
            }
            for i in 0..m {
                out[uo + i] += back[n + i] + (1.0 - beta) * row[n + i];
                out[un + i] += back[n + m + i] + beta * row[n + i];
            }
        }
        out
    }
}

/// Dense trajectory, defects and their Jacobians for one decision vector.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub dense: DenseTrajectory,
    /// `d_k = x_k+1 - Phi(x_k, u_k, u_k+1)`, `k = 0..K-1`.
    pub defects: Vec<DVector<f64>>,
    /// Stacked defect Jacobian, `(K-1) n x K (n + m)`.
    pub defect_jacobian: DMatrix<f64>,
}

impl Discretization {
    pub fn defect_l1(&self) -> f64 {
        self.defects.iter().map(|d| d.lp_norm(1)).sum()
    }

    pub fn defect_max(&self) -> f64 {
        self.defects.iter().map(|d| d.amax()).fold(0.0, f64::max)
    }

    pub fn stacked_defects(&self) -> DVector<f64> {
        let n = self.defects.first().map_or(0, |d| d.len());
        let mut out = DVector::zeros(self.defects.len() * n);
        for (k, d) in self.defects.iter().enumerate() {
            out.rows_mut(k * n, n).copy_from(d);
        }
        out
    }
}

fn check_dims(model: &dyn DynamicsModel, z: &DecisionVector, grid: &GridSpec) -> Result<(), TranscriptionError> {
    let expected = grid.nodes * (model.state_dim() + model.control_dim());
    if z.len() != expected
        || z.nodes() != grid.nodes
        || z.state_dim() != model.state_dim()
        || z.control_dim() != model.control_dim()
    {
        return Err(TranscriptionError::Dimension {
            expected,
            found: z.len(),
        });
    }
    grid.validate()
}

pub fn discretize(
    model: &dyn DynamicsModel,
    z: &DecisionVector,
    grid: &GridSpec,
) -> Result<Discretization, TranscriptionError> {
    check_dims(model, z, grid)?;
    let (n, m) = (model.state_dim(), model.control_dim());
    let big_k = grid.nodes;
    let total = grid.dense_len();
    let mut dense = DenseTrajectory {
        times: Vec::with_capacity(total),
        states: Vec::with_capacity(total),
        controls: Vec::with_capacity(total),
        owner: Vec::with_capacity(total),
        hold_weight: Vec::with_capacity(total),
        sensitivities: Vec::with_capacity(total),
        channels: model.channels(),
        nodes: big_k,
    };
    let mut defects = Vec::with_capacity(big_k - 1);
    let mut jac = DMatrix::zeros((big_k - 1) * n, z.len());

    for k in 0..big_k - 1 {
        let (u0, u1) = (z.control(k), z.control(k + 1));
        let arc = integrate_interval(model, &z.state(k), &u0, &u1, k, grid)?;
        let first = if k == 0 { 0 } else { 1 };
        for i in first..=grid.substeps {
            let idx = k * grid.substeps + i;
            let beta = i as f64 / grid.substeps as f64;
            dense.times.push(grid.dense_time(idx));
            dense.states.push(arc.states[i].clone());
            dense.controls.push(&u0 * (1.0 - beta) + &u1 * beta);
            dense.owner.push(k);
            dense.hold_weight.push(beta);
            dense.sensitivities.push(arc.sensitivities[i].clone());
        }
        let flow = flow_from_arc(&arc, n, m);
        defects.push(z.state(k + 1) - &flow.value);
        let row = k * n;
        jac.view_mut((row, z.state_offset(k + 1)), (n, n)).fill_with_identity();
        jac.view_mut((row, z.state_offset(k)), (n, n)).copy_from(&(-&flow.d_state));
        jac.view_mut((row, z.control_offset(k)), (n, m)).copy_from(&(-&flow.d_control));
        jac.view_mut((row, z.control_offset(k + 1)), (n, m))
            .copy_from(&(-&flow.d_control_next));
    }
    Ok(Discretization {
        dense,
        defects,
        defect_jacobian: jac,
    })
}

pub fn build_dense_trajectory(
    model: &dyn DynamicsModel,
    z: &DecisionVector,
    grid: &GridSpec,
) -> Result<DenseTrajectory, TranscriptionError> {
    Ok(discretize(model, z, grid)?.dense)
}

pub fn defects(
    model: &dyn DynamicsModel,
    z: &DecisionVector,
    grid: &GridSpec,
) -> Result<Vec<DVector<f64>>, TranscriptionError> {
    Ok(discretize(model, z, grid)?.defects)
}

/// Decision vector obtained by integrating forward from `x0`, so that every
/// defect vanishes.
pub fn forward_simulate(
    model: &dyn DynamicsModel,
    x0: &DVector<f64>,
    controls: &[DVector<f64>],
    grid: &GridSpec,
) -> Result<DecisionVector, TranscriptionError> {
    let mut states = vec![x0.clone()];
    for k in 0..grid.nodes - 1 {
        let arc = integrate_interval(model, &states[k], &controls[k], &controls[k + 1], k, grid)?;
        states.push(arc.states.last().unwrap().clone());
    }
    Ok(DecisionVector::from_nodes(&states, controls))
}

/// Straight-line guess between `x_i` and `x_f` with nominal controls.
/// Positions are interpolated linearly; for the model's kinematic pairs the
/// interior velocities are set to the interpolant's slope.
pub fn initial_guess(
    model: &dyn DynamicsModel,
    x_i: &DVector<f64>,
    x_f: &DVector<f64>,
    grid: &GridSpec,
) -> DecisionVector {
    let big_k = grid.nodes;
    let pairs = model.kinematic_pairs();
    let mut states = Vec::with_capacity(big_k);
    for k in 0..big_k {
        let s = k as f64 / (big_k - 1) as f64;
        let mut x = x_i * (1.0 - s) + x_f * s;
        if k > 0 && k + 1 < big_k {
            for &(p, v) in &pairs {
                x[v] = (x_f[p] - x_i[p]) / grid.final_time;
            }
        }
        states.push(x);
    }
    let controls = vec![model.nominal_control(); big_k];
    DecisionVector::from_nodes(&states, &controls)
}
