//! Central finite differences and error measures for derivative checks.

use nalgebra::{DMatrix, DVector};

/// Jacobian of `f` at `x` by central differences with step `h * (1 + |x_j|)`.
pub fn jacobian(f: &dyn Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let f0 = f(x);
    let mut jac = DMatrix::zeros(f0.len(), x.len());
    for j in 0..x.len() {
        let step = h * (1.0 + x[j].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += step;
        xm[j] -= step;
        let col = (f(&xp) - f(&xm)) / (2.0 * step);
        jac.set_column(j, &col);
    }
    jac
}

pub fn gradient(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let wrapped = |v: &DVector<f64>| DVector::from_element(1, f(v));
    jacobian(&wrapped, x, h).row(0).transpose()
}

/// Normwise relative error `|a - b|_inf / max(|b|_inf, floor)`.
pub fn rel_err(analytic: &[f64], reference: &[f64], floor: f64) -> f64 {
    let diff = analytic
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = reference.iter().map(|v| v.abs()).fold(0.0, f64::max).max(floor);
    diff / scale
}
