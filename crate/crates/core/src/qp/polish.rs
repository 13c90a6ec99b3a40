//! Active-set polish: guess the active inequalities from an approximate
//! primal-dual pair, solve the equality-constrained KKT system they define,
//! and repair the guess until the pair is primal and dual feasible.

use nalgebra::{DMatrix, DVector};

use super::{QpSolution, QuadraticProgram};

const DELTA: f64 = 1e-9;
const REFINE_STEPS: usize = 8;
const MAX_ROUNDS: usize = 30;

pub(super) fn polish(
    qp: &QuadraticProgram,
    approx: &QpSolution,
    tol: f64,
) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let m_in = qp.b_in.len();
    let slack = &qp.b_in - &qp.a_in * &approx.z;
    let mut active: Vec<bool> = (0..m_in).map(|i| slack[i] < approx.y_in[i]).collect();
    let mut seen: Vec<Vec<bool>> = Vec::new();

    for _ in 0..MAX_ROUNDS {
        let (z, y_eq, y_act) = solve_reduced(qp, &active)?;
        let mut y_in = DVector::zeros(m_in);
        for (k, i) in active_rows(&active).enumerate() {
            y_in[i] = y_act[k];
        }
        let slack = &qp.b_in - &qp.a_in * &z;
        let mut changed = false;
        seen.push(active.clone());
        for i in 0..m_in {
            if active[i] && y_in[i] < -tol {
                active[i] = false;
                changed = true;
            } else if !active[i] && slack[i] < -tol {
                active[i] = true;
                changed = true;
            }
        }
        if !changed {
            return Some((z, y_eq, y_in));
        }
        if seen.contains(&active) {
            // cycling; give up and let ADMM tighten instead
            return None;
        }
    }
    None
}

fn active_rows(active: &[bool]) -> impl Iterator<Item = usize> + '_ {
    active.iter().enumerate().filter(|(_, a)| **a).map(|(i, _)| i)
}

/// Solves `[P A_r'; A_r 0] (z, y) = (-q, b_r)` with a regularized
/// factorization and iterative refinement against the exact matrix.
fn solve_reduced(qp: &QuadraticProgram, active: &[bool]) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let n = qp.dim();
    let n_eq = qp.b_eq.len();
    let rows: Vec<usize> = active_rows(active).collect();
    let r = n_eq + rows.len();
    let mut kkt = DMatrix::zeros(n + r, n + r);
    let mut rhs = DVector::zeros(n + r);
    kkt.view_mut((0, 0), (n, n)).copy_from(&qp.p);
    rhs.rows_mut(0, n).copy_from(&(-&qp.q));
    for i in 0..n_eq {
        let row = qp.a_eq.row(i);
        kkt.view_mut((n + i, 0), (1, n)).copy_from(&row);
        kkt.view_mut((0, n + i), (n, 1)).copy_from(&row.transpose());
        rhs[n + i] = qp.b_eq[i];
    }
    for (k, &i) in rows.iter().enumerate() {
        let row = qp.a_in.row(i);
        kkt.view_mut((n + n_eq + k, 0), (1, n)).copy_from(&row);
        kkt.view_mut((0, n + n_eq + k), (n, 1)).copy_from(&row.transpose());
        rhs[n + n_eq + k] = qp.b_in[i];
    }
    let mut reg = kkt.clone();
    for i in 0..n {
        reg[(i, i)] += DELTA;
    }
    for i in n..n + r {
        reg[(i, i)] -= DELTA;
    }
    let lu = reg.lu();
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..REFINE_STEPS {
        let res = &rhs - &kkt * &sol;
        if res.amax() <= 1e-15 * (1.0 + rhs.amax()) {
            break;
        }
        sol += lu.solve(&res)?;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let z = sol.rows(0, n).into_owned();
    let y_eq = sol.rows(n, n_eq).into_owned();
    let y_act = sol.rows(n + n_eq, rows.len()).into_owned();
    Some((z, y_eq, y_act))
}
