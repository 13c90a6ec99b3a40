//! Ruiz equilibration of the KKT matrix `[P A'; A 0]` plus cost scaling.

use nalgebra::{DMatrix, DVector};

use super::QuadraticProgram;

const MIN_SCALE: f64 = 1e-4;
const MAX_SCALE: f64 = 1e4;

/// Problem in the form `l <= A z <= u` after scaling:
/// `P = c D P0 D`, `q = c D q0`, `A = E A0 D`, bounds multiplied by `E`.
/// Equality rows come first with `l = u`.
pub(super) struct ScaledProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub l: DVector<f64>,
    pub u: DVector<f64>,
    pub d: DVector<f64>,
    pub e: DVector<f64>,
    pub c: f64,
    pub n_eq: usize,
}

fn clamp_scale(v: f64) -> f64 {
    if v < MIN_SCALE {
        1.0
    } else {
        v.min(MAX_SCALE)
    }
}

impl ScaledProblem {
    pub fn new(qp: &QuadraticProgram, iters: usize) -> Self {
        let n = qp.dim();
        let n_eq = qp.b_eq.len();
        let m = n_eq + qp.b_in.len();
        let mut a = DMatrix::zeros(m, n);
        a.rows_mut(0, n_eq).copy_from(&qp.a_eq);
        a.rows_mut(n_eq, m - n_eq).copy_from(&qp.a_in);
        let mut l = DVector::from_element(m, f64::NEG_INFINITY);
        let mut u = DVector::zeros(m);
        l.rows_mut(0, n_eq).copy_from(&qp.b_eq);
        u.rows_mut(0, n_eq).copy_from(&qp.b_eq);
        u.rows_mut(n_eq, m - n_eq).copy_from(&qp.b_in);

        let mut p = qp.p.clone();
        let mut q = qp.q.clone();
        let mut d = DVector::from_element(n, 1.0);
        let mut e = DVector::from_element(m, 1.0);
        let mut c = 1.0;

        for _ in 0..iters {
            let mut dd = DVector::zeros(n);
            for j in 0..n {
                let norm = p.column(j).amax().max(a.column(j).amax());
                dd[j] = 1.0 / clamp_scale(norm).sqrt();
            }
            let mut de = DVector::zeros(m);
            for i in 0..m {
                de[i] = 1.0 / clamp_scale(a.row(i).amax()).sqrt();
            }
            scale_sym(&mut p, &dd);
            q.component_mul_assign(&dd);
            for j in 0..n {
                a.column_mut(j).scale_mut(dd[j]);
            }
            for i in 0..m {
                a.row_mut(i).scale_mut(de[i]);
            }
            d.component_mul_assign(&dd);
            e.component_mul_assign(&de);

            // cost scaling
            let mean_col = if n > 0 {
                (0..n).map(|j| p.column(j).amax()).sum::<f64>() / n as f64
            } else {
                1.0
            };
            let gamma = 1.0 / clamp_scale(mean_col.max(q.amax()));
            p *= gamma;
            q *= gamma;
            c *= gamma;
        }
        for i in 0..m {
            l[i] *= e[i];
            u[i] *= e[i];
        }
        Self {
            p,
            q,
            a,
            l,
            u,
            d,
            e,
            c,
            n_eq,
        }
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }
}

fn scale_sym(p: &mut DMatrix<f64>, d: &DVector<f64>) {
    let n = d.len();
    for j in 0..n {
        for i in 0..n {
            p[(i, j)] *= d[i] * d[j];
        }
    }
}
