use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Polynomial expression over named channels: constants, channel
/// references, `+`, `-`, `*`, unary negation and integer powers.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Channel(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Exponent is at least 1.
    Pow(Box<Expr>, u32),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("channel `{0}` is missing from the sample")]
    MissingChannel(String),
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn channel(name: impl Into<String>) -> Self {
        Expr::Channel(name.into())
    }

    pub fn neg(e: Expr) -> Self {
        Expr::Neg(Box::new(e))
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    /// Panics if `k == 0`.
    pub fn pow(e: Expr, k: u32) -> Self {
        assert!(k >= 1, "exponent must be at least 1");
        Expr::Pow(Box::new(e), k)
    }

    pub(crate) fn collect_channels(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Channel(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(e) | Expr::Pow(e, _) => e.collect_channels(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_channels(out);
                b.collect_channels(out);
            }
        }
    }

    pub fn channels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_channels(&mut out);
        out
    }

    /// Evaluates the expression, reading channels through `lookup`.
    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(v) => *v,
            Expr::Channel(name) => {
                lookup(name).ok_or_else(|| EvalError::MissingChannel(name.clone()))?
            }
            Expr::Neg(e) => -e.eval_with(lookup)?,
            Expr::Add(a, b) => a.eval_with(lookup)? + b.eval_with(lookup)?,
            Expr::Sub(a, b) => a.eval_with(lookup)? - b.eval_with(lookup)?,
            Expr::Mul(a, b) => a.eval_with(lookup)? * b.eval_with(lookup)?,
            Expr::Pow(e, k) => e.eval_with(lookup)?.powi(*k as i32),
        })
    }

    pub fn eval(&self, sample: &HashMap<String, f64>) -> Result<f64, EvalError> {
        self.eval_with(&|name| sample.get(name).copied())
    }

    /// Partial derivatives with respect to every referenced channel.
    pub fn gradient(&self, sample: &HashMap<String, f64>) -> Result<BTreeMap<String, f64>, EvalError> {
        let mut grad: BTreeMap<String, f64> =
            self.channels().into_iter().map(|c| (c, 0.0)).collect();
        let lookup = |name: &str| sample.get(name).copied();
        self.backprop(&lookup, 1.0, &mut |name, d| {
            *grad.get_mut(name).expect("channel collected above") += d;
        })?;
        Ok(grad)
    }

    /// Reverse-mode pass: adds `seed * d(self)/d(channel)` through `acc` and
    /// returns the value.
    fn backprop(
        &self,
        lookup: &dyn Fn(&str) -> Option<f64>,
        seed: f64,
        acc: &mut dyn FnMut(&str, f64),
    ) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(v) => *v,
            Expr::Channel(name) => {
                let v = lookup(name).ok_or_else(|| EvalError::MissingChannel(name.clone()))?;
                acc(name, seed);
                v
            }
            Expr::Neg(e) => -e.backprop(lookup, -seed, acc)?,
            Expr::Add(a, b) => a.backprop(lookup, seed, acc)? + b.backprop(lookup, seed, acc)?,
            Expr::Sub(a, b) => a.backprop(lookup, seed, acc)? - b.backprop(lookup, -seed, acc)?,
            Expr::Mul(a, b) => {
                let va = a.eval_with(lookup)?;
                let vb = b.eval_with(lookup)?;
                a.backprop(lookup, seed * vb, acc)?;
                b.backprop(lookup, seed * va, acc)?;
                va * vb
            }
            Expr::Pow(e, k) => {
                let v = e.eval_with(lookup)?;
                let d = *k as f64 * v.powi(*k as i32 - 1);
                e.backprop(lookup, seed * d, acc)?;
                v.powi(*k as i32)
            }
        })
    }

    /// Resolves channel names to column indices for fast row evaluation.
    pub fn compile(&self, resolve: &dyn Fn(&str) -> Option<usize>) -> Result<IndexedExpr, EvalError> {
        Ok(match self {
            Expr::Const(v) => IndexedExpr::Const(*v),
            Expr::Channel(name) => IndexedExpr::Column(
                resolve(name).ok_or_else(|| EvalError::MissingChannel(name.clone()))?,
            ),
            Expr::Neg(e) => IndexedExpr::Neg(Box::new(e.compile(resolve)?)),
            Expr::Add(a, b) => {
                IndexedExpr::Add(Box::new(a.compile(resolve)?), Box::new(b.compile(resolve)?))
            }
            Expr::Sub(a, b) => {
                IndexedExpr::Sub(Box::new(a.compile(resolve)?), Box::new(b.compile(resolve)?))
            }
            Expr::Mul(a, b) => {
                IndexedExpr::Mul(Box::new(a.compile(resolve)?), Box::new(b.compile(resolve)?))
            }
            Expr::Pow(e, k) => IndexedExpr::Pow(Box::new(e.compile(resolve)?), *k),
        })
    }
}

/// [`Expr`] with channels bound to columns of a sample row.
#[derive(Debug, Clone)]
pub enum IndexedExpr {
    Const(f64),
    Column(usize),
    Neg(Box<IndexedExpr>),
    Add(Box<IndexedExpr>, Box<IndexedExpr>),
    Sub(Box<IndexedExpr>, Box<IndexedExpr>),
    Mul(Box<IndexedExpr>, Box<IndexedExpr>),
    Pow(Box<IndexedExpr>, u32),
}

impl IndexedExpr {
    pub fn eval(&self, row: &[f64]) -> f64 {
        match self {
            IndexedExpr::Const(v) => *v,
            IndexedExpr::Column(i) => row[*i],
            IndexedExpr::Neg(e) => -e.eval(row),
            IndexedExpr::Add(a, b) => a.eval(row) + b.eval(row),
            IndexedExpr::Sub(a, b) => a.eval(row) - b.eval(row),
            IndexedExpr::Mul(a, b) => a.eval(row) * b.eval(row),
            IndexedExpr::Pow(e, k) => e.eval(row).powi(*k as i32),
        }
    }

    /// Adds `seed * gradient` into `grad` (same layout as `row`).
    pub fn backprop(&self, row: &[f64], seed: f64, grad: &mut [f64]) {
        match self {
            IndexedExpr::Const(_) => {}
            IndexedExpr::Column(i) => grad[*i] += seed,
            IndexedExpr::Neg(e) => e.backprop(row, -seed, grad),
            IndexedExpr::Add(a, b) => {
                a.backprop(row, seed, grad);
                b.backprop(row, seed, grad);
            }
            IndexedExpr::Sub(a, b) => {
                a.backprop(row, seed, grad);
                b.backprop(row, -seed, grad);
            }
            IndexedExpr::Mul(a, b) => {
                let (va, vb) = (a.eval(row), b.eval(row));
                a.backprop(row, seed * vb, grad);
                b.backprop(row, seed * va, grad);
            }
            IndexedExpr::Pow(e, k) => {
                let v = e.eval(row);
                e.backprop(row, seed * *k as f64 * v.powi(*k as i32 - 1), grad);
            }
        }
    }
}
