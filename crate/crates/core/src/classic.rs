//! Boolean and min/max robustness on sampled signals.
//!
//! This is the reference the smooth evaluator is checked against, so it is
//! written as a plain recursion over the [`Formula`] tree and shares nothing
//! with it beyond window selection.

use std::collections::HashMap;

use crate::robustness::RobustnessError;
use crate::signal::{index_set, Signal};
use crate::stl::{Expr, Formula};

/// Min/max robustness of `f` at sample `anchor`.
pub fn classical_robustness(f: &Formula, signal: &Signal, anchor: usize) -> Result<f64, RobustnessError> {
    if anchor >= signal.len() {
        return Err(RobustnessError::Anchor {
            anchor,
            len: signal.len(),
        });
    }
    Classic::new(signal).rho(f, anchor)
}

/// Satisfaction on the sample grid; ties (robustness exactly zero) count as
/// satisfied.
pub fn boolean_satisfaction(f: &Formula, signal: &Signal, anchor: usize) -> Result<bool, RobustnessError> {
    Ok(classical_robustness(f, signal, anchor)? >= 0.0)
}

/// First sample in the window of a top-level `Until`/`Eventually` at which
/// the obligation is met, if any.
pub fn witness(f: &Formula, signal: &Signal, anchor: usize) -> Result<Option<usize>, RobustnessError> {
    let mut cl = Classic::new(signal);
    match f {
        Formula::Eventually(iv, g) => {
            for m in index_set(anchor, *iv, signal.times(), cl.tol)? {
                if cl.rho(g, m)? >= 0.0 {
                    return Ok(Some(m));
                }
            }
            Ok(None)
        }
        Formula::Until(iv, lhs, rhs) => {
            for m in index_set(anchor, *iv, signal.times(), cl.tol)? {
                let mut held = f64::INFINITY;
                for q in anchor..=m {
                    held = held.min(cl.rho(lhs, q)?);
                }
                if cl.rho(rhs, m)?.min(held) >= 0.0 {
                    return Ok(Some(m));
                }
            }
            Ok(None)
        }
        _ => Ok(None),
    }
}

struct Classic<'s> {
    signal: &'s Signal,
    tol: f64,
    memo: HashMap<(*const Formula, usize), f64>,
}

impl<'s> Classic<'s> {
    fn new(signal: &'s Signal) -> Self {
        Self {
            signal,
            tol: signal.time_tolerance(),
            memo: HashMap::new(),
        }
    }

    fn predicate(&self, g: &Expr, m: usize) -> Result<f64, RobustnessError> {
        let row = self.signal.row(m);
        Ok(g.eval_with(&|name| self.signal.column(name).map(|i| row[i]))?)
    }

    fn rho(&mut self, f: &Formula, m: usize) -> Result<f64, RobustnessError> {
        let key = (f as *const Formula, m);
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let v = match f {
            Formula::Predicate(g) => self.predicate(g, m)?,
            Formula::Not(g) => -self.rho(g, m)?,
            Formula::And(args) => {
                let mut acc = f64::INFINITY;
                for g in args {
                    acc = acc.min(self.rho(g, m)?);
                }
                acc
            }
            Formula::Or(args) => {
                let mut acc = f64::NEG_INFINITY;
                for g in args {
                    acc = acc.max(self.rho(g, m)?);
                }
                acc
            }
            Formula::Implies(a, b) => (-self.rho(a, m)?).max(self.rho(b, m)?),
            Formula::Always(iv, g) => {
                let mut acc = f64::INFINITY;
                for q in index_set(m, *iv, self.signal.times(), self.tol)? {
                    acc = acc.min(self.rho(g, q)?);
                }
                acc
            }
            Formula::Eventually(iv, g) => {
                let mut acc = f64::NEG_INFINITY;
                for q in index_set(m, *iv, self.signal.times(), self.tol)? {
                    acc = acc.max(self.rho(g, q)?);
                }
                acc
            }
            Formula::Until(iv, lhs, rhs) => {
                let win = index_set(m, *iv, self.signal.times(), self.tol)?;
                let mut best = f64::NEG_INFINITY;
                let mut held = f64::INFINITY;
                let mut q = m;
                for j in win {
                    while q <= j {
                        held = held.min(self.rho(lhs, q)?);
                        q += 1;
                    }
                    best = best.max(self.rho(rhs, j)?.min(held));
                }
                best
            }
        };
        self.memo.insert(key, v);
        Ok(v)
    }
}
