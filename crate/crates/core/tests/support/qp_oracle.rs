//! Brute-force QP reference: enumerate every subset of inequalities as the
//! active set, solve the resulting KKT system exactly, keep the feasible pair
//! with nonnegative multipliers and the smallest objective. Only usable for a
//! handful of inequalities.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use ctstl_core::qp::QuadraticProgram;

pub fn enumerate_active_sets(qp: &QuadraticProgram) -> Option<DVector<f64>> {
    let n = qp.dim();
    let n_eq = qp.b_eq.len();
    let m_in = qp.b_in.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << m_in) {
        let rows: Vec<usize> = (0..m_in).filter(|i| mask & (1 << i) != 0).collect();
        let r = n_eq + rows.len();
        if r > n {
            continue;
        }
        let mut k = DMatrix::zeros(n + r, n + r);
        let mut rhs = DVector::zeros(n + r);
        k.view_mut((0, 0), (n, n)).copy_from(&qp.p);
        for j in 0..n {
            rhs[j] = -qp.q[j];
        }
        let mut put = |slot: usize, row: Vec<f64>, b: f64| {
            for j in 0..n {
                k[(n + slot, j)] = row[j];
                k[(j, n + slot)] = row[j];
            }
            rhs[n + slot] = b;
        };
        for i in 0..n_eq {
            put(i, qp.a_eq.row(i).iter().copied().collect(), qp.b_eq[i]);
        }
        for (s, &i) in rows.iter().enumerate() {
            put(n_eq + s, qp.a_in.row(i).iter().copied().collect(), qp.b_in[i]);
        }
        let Some(sol) = k.lu().solve(&rhs) else { continue };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let z = sol.rows(0, n).into_owned();
        let feasible = (0..m_in).all(|i| qp.a_in.row(i).dot(&z.transpose()) <= qp.b_in[i] + 1e-9);
        let duals_ok = (0..rows.len()).all(|s| sol[n + n_eq + s] >= -1e-9);
        if feasible && duals_ok {
            let obj = qp.objective(&z);
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, z));
            }
        }
    }
    best.map(|(_, z)| z)
}

/// Strictly convex QP with a known feasible point; some inequalities are
/// built to be active at a random point so the oracle has work to do.
pub fn random_qp(rng: &mut ChaCha8Rng, with_equalities: bool) -> QuadraticProgram {
    let n = rng.gen_range(2..=8);
    let m_in = rng.gen_range(1..=5);
    let n_eq = if with_equalities { rng.gen_range(0..=n.min(2) - 1) } else { 0 };
    let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let p = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
    let q = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
    let z0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let a_in = DMatrix::from_fn(m_in, n, |_, _| rng.gen_range(-2.0..2.0));
    let b_in = DVector::from_fn(m_in, |i, _| a_in.row(i).dot(&z0.transpose()) + rng.gen_range(0.0..1.0));
    let a_eq = DMatrix::from_fn(n_eq, n, |_, _| rng.gen_range(-2.0..2.0));
    let b_eq = &a_eq * &z0;
    QuadraticProgram::new(p, q)
        .with_equalities(a_eq, b_eq)
        .with_inequalities(a_in, b_in)
}
