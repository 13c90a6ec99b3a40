//! Smooth, sign-exact conjunction and disjunction aggregators.
//!
//! For `y` in R^n and shift `c > 0`:
//!
//! ```text
//! and_c(y) = sqrt(M0(relu(y)^2)) - sqrt(M1(negpart(y)^2))
//! M0(z)    = (c^n + prod z_i)^(1/n)
//! M1(z)    = c + mean(z)
//! or_c(y)  = -and_c(-y)
//! ```
//!
//! `and_c(y) >= 0` exactly when `min(y) >= 0`, and `or_c(y) >= 0` exactly
//! when `max(y) >= 0`. Both are C^1.
//!
//! Evaluation never forms `sqrt(M0) - sqrt(c)` by subtraction: with
//! `r = prod(y_i^2 / c)` the positive branch is
//! `sqrt(c) * expm1(ln(1 + r) / (2n))`, and the negative branch is
//! `-mean / (sqrt(c) + sqrt(c + mean))`. Both keep their sign even when the
//! magnitude is far below `sqrt(c)`.

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GmsrError {
    #[error("aggregator input is empty")]
    Empty,
    #[error("shift parameter must be positive and finite, got {0}")]
    BadShift(f64),
}

/// Shift parameters for every aggregation level.
///
/// `c` is used by `And`, `Or`, `Implies`, `Always`, `Eventually` and by the
/// outer disjunction of `Until`; `until_witness` and `until_prefix` are the
/// inner conjunctions of `Until` (witness pair and running prefix).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GmsrConfig {
    pub c: f64,
    pub until_witness: f64,
    pub until_prefix: f64,
}

impl GmsrConfig {
    /// Same shift at every level.
    pub fn new(c: f64) -> Result<Self, GmsrError> {
        check_shift(c)?;
        Ok(Self {
            c,
            until_witness: c,
            until_prefix: c,
        })
    }

    pub fn validate(&self) -> Result<(), GmsrError> {
        check_shift(self.c)?;
        check_shift(self.until_witness)?;
        check_shift(self.until_prefix)
    }
}

impl Default for GmsrConfig {
    fn default() -> Self {
        Self::new(0.005).unwrap()
    }
}

fn check_shift(c: f64) -> Result<(), GmsrError> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(GmsrError::BadShift(c))
    }
}

/// Inputs at which the product of squared margins is taken in log space.
const DIRECT_MAX_LEN: usize = 30;
const DIRECT_MAX_ABS: f64 = 1e3;

/// Smallest positive subnormal, returned when the exact result underflows.
const TINY: f64 = 5e-324;

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `1 / (1 + e^-x)` without overflow.
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(prod(y_i^2 / c))` for strictly positive `y`, optionally forcing the
/// log-space route.
fn log_ratio(y: &[f64], c: f64, force_log: bool) -> f64 {
    let direct_ok = !force_log
        && y.len() <= DIRECT_MAX_LEN
        && y.iter().all(|v| v.abs() <= DIRECT_MAX_ABS);
    if direct_ok {
        let r: f64 = y.iter().map(|v| v * v / c).product();
        if r.is_normal() {
            return r.ln();
        }
    }
    let lc = c.ln();
    y.iter().map(|v| 2.0 * v.ln() - lc).sum()
}

fn and_impl(y: &[f64], c: f64, grad: Option<&mut [f64]>, force_log: bool) -> f64 {
    let n = y.len() as f64;
    let sc = c.sqrt();
    let neg_mean = y.iter().map(|v| v.min(0.0).powi(2)).sum::<f64>() / n;
    if neg_mean == 0.0 && y.iter().any(|v| *v < 0.0) {
        // Negative margins too small to square: the true value is below the
        // subnormal range, round away from zero to keep the sign.
        if let Some(g) = grad {
            g.fill(0.0);
        }
        return -TINY;
    }
    if neg_mean > 0.0 {
        // Product of relu terms vanishes: first term is exactly sqrt(c).
        let b = (c + neg_mean).sqrt();
        if let Some(g) = grad {
            for (gi, v) in g.iter_mut().zip(y) {
                *gi = -v.min(0.0) / (n * b);
            }
        }
        return -neg_mean / (sc + b);
    }
    if y.iter().any(|v| *v <= 0.0) {
        // Some margin is exactly zero: value and gradient are zero.
        if let Some(g) = grad {
            g.fill(0.0);
        }
        return 0.0;
    }
    let lr = log_ratio(y, c, force_log);
    let sp = softplus(lr);
    // The exact value can underflow for long windows of tiny margins; keep
    // it on the positive side.
    let value = (sc * (sp / (2.0 * n)).exp_m1()).max(TINY);
    if let Some(g) = grad {
        let a = sc * (sp / (2.0 * n)).exp();
        let w = a * logistic(lr) / n;
        for (gi, v) in g.iter_mut().zip(y) {
            *gi = w / v;
        }
    }
    value
}

/// Smooth conjunction value.
pub fn and_value(y: &[f64], c: f64) -> f64 {
    debug_assert!(!y.is_empty());
    and_impl(y, c, None, false)
}

/// Smooth conjunction; writes the gradient into `grad` and returns the value.
pub fn and_with_grad(y: &[f64], c: f64, grad: &mut [f64]) -> f64 {
    debug_assert_eq!(y.len(), grad.len());
    and_impl(y, c, Some(grad), false)
}

/// Smooth disjunction value.
pub fn or_value(y: &[f64], c: f64) -> f64 {
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    -and_value(&neg, c)
}

/// Smooth disjunction; writes the gradient into `grad` and returns the value.
pub fn or_with_grad(y: &[f64], c: f64, grad: &mut [f64]) -> f64 {
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    // d/dy [-and(-y)] = and'(-y)
    -and_with_grad(&neg, c, grad)
}

/// Smooth conjunction returning `(value, gradient)`.
pub fn gmsr_and(y: &[f64], c: f64) -> Result<(f64, Vec<f64>), GmsrError> {
    if y.is_empty() {
        return Err(GmsrError::Empty);
    }
    check_shift(c)?;
    let mut g = vec![0.0; y.len()];
    let v = and_with_grad(y, c, &mut g);
    Ok((v, g))
}

/// Smooth disjunction returning `(value, gradient)`.
pub fn gmsr_or(y: &[f64], c: f64) -> Result<(f64, Vec<f64>), GmsrError> {
    if y.is_empty() {
        return Err(GmsrError::Empty);
    }
    check_shift(c)?;
    let mut g = vec![0.0; y.len()];
    let v = or_with_grad(y, c, &mut g);
    Ok((v, g))
}
