//! Operator-splitting iteration on the scaled problem.

use nalgebra::{Cholesky, DVector, Dyn};

use super::scaling::ScaledProblem;
use super::{QpError, QpSettings, WarmStart};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const EQ_RHO_FACTOR: f64 = 1e3;
const RHO_UPDATE_EVERY: usize = 25;

pub(super) enum Outcome {
    Converged,
    MaxIterations,
    /// Certificate in unscaled units.
    Infeasible(DVector<f64>),
}

pub(super) struct Admm<'a> {
    sp: &'a ScaledProblem,
    cfg: QpSettings,
    x: DVector<f64>,
    z: DVector<f64>,
    y: DVector<f64>,
    rho: f64,
    rho_vec: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    iter: usize,
}

fn row_rho(sp: &ScaledProblem, rho: f64) -> DVector<f64> {
    DVector::from_fn(sp.rows(), |i, _| {
        if i < sp.n_eq {
            rho * EQ_RHO_FACTOR
        } else {
            rho
        }
    })
}

fn factor(sp: &ScaledProblem, sigma: f64, rho_vec: &DVector<f64>) -> Result<Cholesky<f64, Dyn>, QpError> {
    let n = sp.cols();
    let mut k = sp.p.clone();
    for i in 0..n {
        k[(i, i)] += sigma;
    }
    let mut ra = sp.a.clone();
    for i in 0..ra.nrows() {
        ra.row_mut(i).scale_mut(rho_vec[i]);
    }
    k += sp.a.tr_mul(&ra);
    Cholesky::new(k).ok_or(QpError::Factorization)
}

impl<'a> Admm<'a> {
    pub fn new(sp: &'a ScaledProblem, cfg: &QpSettings, warm: Option<&WarmStart>) -> Result<Self, QpError> {
        let (n, m) = (sp.cols(), sp.rows());
        let (x, y) = match warm {
            Some(w) => {
                let x = w.z.component_div(&sp.d);
                let mut y = DVector::zeros(m);
                for i in 0..sp.n_eq {
                    y[i] = w.y_eq[i] * sp.c / sp.e[i];
                }
                for i in sp.n_eq..m {
                    y[i] = w.y_in[i - sp.n_eq] * sp.c / sp.e[i];
                }
                (x, y)
            }
            None => (DVector::zeros(n), DVector::zeros(m)),
        };
        let z = clamp(&(&sp.a * &x), &sp.l, &sp.u);
        let rho_vec = row_rho(sp, cfg.rho);
        let chol = factor(sp, cfg.sigma, &rho_vec)?;
        Ok(Self {
            sp,
            cfg: *cfg,
            x,
            z,
            y,
            rho: cfg.rho,
            rho_vec,
            chol,
            iter: 0,
        })
    }

    pub fn iterations(&self) -> usize {
        self.iter
    }

    /// Current iterate in original units: `(z, y_eq, y_in)`.
    pub fn unscaled(&self) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let sp = self.sp;
        let x = self.x.component_mul(&sp.d);
        let y = self.y.component_mul(&sp.e) / sp.c;
        let y_eq = y.rows(0, sp.n_eq).into_owned();
        let y_in = y.rows(sp.n_eq, sp.rows() - sp.n_eq).into_owned();
        (x, y_eq, y_in)
    }

    /// Iterates until the scaled-back residuals satisfy the given tolerances,
    /// the problem is certified infeasible, or the iteration budget runs out.
    pub fn run(&mut self, eps_abs: f64, eps_rel: f64) -> Result<Outcome, QpError> {
        let sp = self.sp;
        let (sigma, alpha) = (self.cfg.sigma, self.cfg.alpha);
        if self.converged(eps_abs, eps_rel).0 {
            return Ok(Outcome::Converged);
        }
        while self.iter < self.cfg.max_iter {
            self.iter += 1;
            let y_prev = self.y.clone();

            let w = self.rho_vec.component_mul(&self.z) - &self.y;
            let rhs = &self.x * sigma - &sp.q + sp.a.tr_mul(&w);
            let x_t = self.chol.solve(&rhs);
            let z_t = &sp.a * &x_t;
            self.x = &x_t * alpha + &self.x * (1.0 - alpha);
            let z_r = &z_t * alpha + &self.z * (1.0 - alpha);
            let z_new = clamp(&(&z_r + self.y.component_div(&self.rho_vec)), &sp.l, &sp.u);
            self.y += self.rho_vec.component_mul(&(&z_r - &z_new));
            self.z = z_new;

            let (done, ratio) = self.converged(eps_abs, eps_rel);
            if done {
                return Ok(Outcome::Converged);
            }
            if let Some(cert) = self.infeasibility(&(&self.y - &y_prev)) {
                return Ok(Outcome::Infeasible(cert));
            }
            if self.cfg.adaptive_rho && self.iter % RHO_UPDATE_EVERY == 0 {
                let new_rho = (self.rho * ratio.sqrt()).clamp(RHO_MIN, RHO_MAX);
                if new_rho > 5.0 * self.rho || new_rho < 0.2 * self.rho {
                    self.rho = new_rho;
                    self.rho_vec = row_rho(sp, new_rho);
                    self.chol = factor(sp, sigma, &self.rho_vec)?;
                }
            }
        }
        Ok(Outcome::MaxIterations)
    }

    /// Termination test on unscaled residuals; also returns the primal/dual
    /// balance used to adapt rho.
    fn converged(&self, eps_abs: f64, eps_rel: f64) -> (bool, f64) {
        let sp = self.sp;
        let ax = &sp.a * &self.x;
        let px = &sp.p * &self.x;
        let aty = sp.a.tr_mul(&self.y);
        let einv = |v: &DVector<f64>| v.component_div(&sp.e).amax();
        let dinv = |v: &DVector<f64>| v.component_div(&sp.d).amax();

        let prim = if sp.rows() > 0 { einv(&(&ax - &self.z)) } else { 0.0 };
        let prim_scale = if sp.rows() > 0 {
            einv(&ax).max(einv(&self.z))
        } else {
            0.0
        };
        let dual = dinv(&(&px + &sp.q + &aty)) / sp.c;
        let dual_scale = dinv(&px).max(dinv(&aty)).max(dinv(&sp.q)) / sp.c;

        let ok = prim <= eps_abs + eps_rel * prim_scale && dual <= eps_abs + eps_rel * dual_scale;
        let ratio = (prim / (prim_scale + 1e-30)) / (dual / (dual_scale + 1e-30) + 1e-30);
        (ok, if ratio.is_finite() && ratio > 0.0 { ratio } else { 1.0 })
    }

    /// Checks `dy` for a primal infeasibility certificate: `A'dy ~ 0` with
    /// `u'max(dy,0) + l'min(dy,0) < 0`.
    fn infeasibility(&self, dy: &DVector<f64>) -> Option<DVector<f64>> {
        let sp = self.sp;
        if sp.rows() == 0 {
            return None;
        }
        let dy_u = dy.component_mul(&sp.e) / sp.c;
        let norm = dy_u.amax();
        if norm <= 1e-30 {
            return None;
        }
        let eps = self.cfg.eps_infeasible;
        // A0' dy_u = D^-1 A' dy / c
        let atdy = sp.a.tr_mul(dy).component_div(&sp.d) / sp.c;
        if atdy.amax() > eps * norm {
            return None;
        }
        let mut support = 0.0;
        for i in 0..sp.rows() {
            let (l0, u0) = (sp.l[i] / sp.e[i], sp.u[i] / sp.e[i]);
            let v = dy_u[i];
            if v > 0.0 {
                support += u0 * v;
            } else if v < 0.0 {
                if !l0.is_finite() {
                    if v < -eps * norm {
                        return None;
                    }
                    continue;
                }
                support += l0 * v;
            }
        }
        if support < -eps * norm {
            Some(dy_u / norm)
        } else {
            None
        }
    }
}

fn clamp(v: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| v[i].max(l[i]).min(u[i]))
}

