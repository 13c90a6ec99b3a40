//! Signal temporal logic formulas over named scalar channels.
//!
//! Predicates are always held in the canonical form `g >= 0`, where `g` is a
//! polynomial [`Expr`] over channel names. Formulas are immutable trees; the
//! n-ary `And`/`Or` nodes map directly onto the n-ary smooth aggregators.

pub(crate) mod compiled;
mod expr;
mod format;
mod parse;

pub use expr::{EvalError, Expr, IndexedExpr};
pub use format::format_formula;
pub use parse::{parse_formula, ParseContext, ParseError, ParseErrorKind};

use std::collections::BTreeSet;
use std::fmt;

/// Closed time window `[lo, hi]` in seconds, relative to the evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid interval [{lo}, {hi}]: endpoints must be finite with 0 <= a <= b")]
pub struct IntervalError {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi {
            Ok(Self { lo, hi })
        } else {
            Err(IntervalError { lo, hi })
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    /// `g >= 0`
    Predicate(Expr),
    Not(Box<Formula>),
    /// At least two operands.
    And(Vec<Formula>),
    /// At least two operands.
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Always(Interval, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn predicate(g: Expr) -> Self {
        Formula::Predicate(g)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    /// n-ary conjunction. Panics with fewer than two operands.
    pub fn and(args: Vec<Formula>) -> Self {
        assert!(args.len() >= 2, "And needs at least two operands");
        Formula::And(args)
    }

    /// n-ary disjunction. Panics with fewer than two operands.
    pub fn or(args: Vec<Formula>) -> Self {
        assert!(args.len() >= 2, "Or needs at least two operands");
        Formula::Or(args)
    }

    pub fn implies(lhs: Formula, rhs: Formula) -> Self {
        Formula::Implies(Box::new(lhs), Box::new(rhs))
    }

    pub fn always(iv: Interval, f: Formula) -> Self {
        Formula::Always(iv, Box::new(f))
    }

    pub fn eventually(iv: Interval, f: Formula) -> Self {
        Formula::Eventually(iv, Box::new(f))
    }

    pub fn until(iv: Interval, lhs: Formula, rhs: Formula) -> Self {
        Formula::Until(iv, Box::new(lhs), Box::new(rhs))
    }

    /// Direct subformulas, left to right.
    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::Predicate(_) => vec![],
            Formula::Not(f) | Formula::Always(_, f) | Formula::Eventually(_, f) => vec![f],
            Formula::And(args) | Formula::Or(args) => args.iter().collect(),
            Formula::Implies(a, b) | Formula::Until(_, a, b) => vec![a, b],
        }
    }

    /// Nesting depth; a bare predicate has depth 1.
    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Every channel referenced by a predicate of this formula.
    pub fn channels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_predicates(&mut |e| e.collect_channels(&mut out));
        out
    }

    /// Every temporal interval in the formula.
    pub fn intervals(&self) -> Vec<Interval> {
        let mut out = Vec::new();
        self.collect_intervals(&mut out);
        out
    }

    fn collect_intervals(&self, out: &mut Vec<Interval>) {
        match self {
            Formula::Always(iv, _) | Formula::Eventually(iv, _) | Formula::Until(iv, _, _) => {
                out.push(*iv)
            }
            _ => {}
        }
        for c in self.children() {
            c.collect_intervals(out);
        }
    }

    /// Longest look-ahead of the formula in seconds: evaluating at `t` reads
    /// samples up to `t + horizon()`.
    pub fn horizon(&self) -> f64 {
        let own = match self {
            Formula::Always(iv, _) | Formula::Eventually(iv, _) | Formula::Until(iv, _, _) => {
                iv.hi
            }
            _ => 0.0,
        };
        own + self
            .children()
            .iter()
            .map(|c| c.horizon())
            .fold(0.0, f64::max)
    }

    fn visit_predicates(&self, f: &mut dyn FnMut(&Expr)) {
        if let Formula::Predicate(e) = self {
            f(e);
        }
        for c in self.children() {
            c.visit_predicates(f);
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_formula(self))
    }
}
