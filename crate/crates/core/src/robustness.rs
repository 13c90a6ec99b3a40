//! Dense-time smooth robustness with exact reverse-mode gradients.
//!
//! A formula is compiled into an arena (parents before children) bound to
//! the columns of a [`Signal`]. Values are memoized per `(node, sample)`;
//! the gradient pass walks the arena once in order, pushing adjoints from
//! each node to its children and finally through the predicates onto the
//! sample table.

use crate::gmsr::{and_with_grad, or_with_grad, GmsrConfig};
use crate::signal::{index_set, Signal, WindowError};
use crate::stl::{EvalError, Formula, Interval};
use crate::stl::compiled::{compile, Node};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RobustnessError {
    #[error(transparent)]
    Channel(#[from] EvalError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error("anchor index {anchor} out of range for {len} samples")]
    Anchor { anchor: usize, len: usize },
}

/// Smooth robustness at one anchor plus its gradient with respect to the
/// sample table (same row-major layout as [`Signal::data`]).
#[derive(Debug, Clone)]
pub struct Robustness {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Smallest `|input|` seen by any aggregator. Gradients are only C^0 in
    /// the second derivative near zero inputs; finite-difference checks use
    /// this to stay away from kinks.
    pub min_abs_input: f64,
}

/// Evaluates `f` at sample `anchor` of `signal`.
pub fn eval_robustness(
    f: &Formula,
    signal: &Signal,
    anchor: usize,
    cfg: &GmsrConfig,
) -> Result<Robustness, RobustnessError> {
    let mut ev = Evaluator::new(f, signal, *cfg)?;
    ev.robustness(anchor)
}

/// Value only.
pub fn robustness_value(
    f: &Formula,
    signal: &Signal,
    anchor: usize,
    cfg: &GmsrConfig,
) -> Result<f64, RobustnessError> {
    Evaluator::new(f, signal, *cfg)?.value(anchor)
}

/// Memoizing evaluator for one formula on one signal.
pub struct Evaluator<'s> {
    nodes: Vec<Node>,
    signal: &'s Signal,
    cfg: GmsrConfig,
    tol: f64,
    memo: Vec<Vec<Option<f64>>>,
    min_abs_input: f64,
}

impl<'s> Evaluator<'s> {
    pub fn new(f: &Formula, signal: &'s Signal, cfg: GmsrConfig) -> Result<Self, RobustnessError> {
        let nodes = compile(f, &|name| signal.column(name))?;
        let memo = vec![vec![None; signal.len()]; nodes.len()];
        Ok(Self {
            nodes,
            signal,
            cfg,
            tol: signal.time_tolerance(),
            memo,
            min_abs_input: f64::INFINITY,
        })
    }

    fn window(&self, anchor: usize, iv: Interval) -> Result<std::ops::RangeInclusive<usize>, WindowError> {
        index_set(anchor, iv, self.signal.times(), self.tol)
    }

    fn check_anchor(&self, anchor: usize) -> Result<(), RobustnessError> {
        if anchor >= self.signal.len() {
            return Err(RobustnessError::Anchor {
                anchor,
                len: self.signal.len(),
            });
        }
        Ok(())
    }

    /// Robustness of the root formula at `anchor`.
    pub fn value(&mut self, anchor: usize) -> Result<f64, RobustnessError> {
        self.check_anchor(anchor)?;
        self.node_value(0, anchor)
    }

    fn note_inputs(&mut self, ys: &[f64]) {
        for y in ys {
            self.min_abs_input = self.min_abs_input.min(y.abs());
        }
    }

    fn node_value(&mut self, id: usize, m: usize) -> Result<f64, RobustnessError> {
        if let Some(v) = self.memo[id][m] {
            return Ok(v);
        }
        let c = self.cfg.c;
        let v = match &self.nodes[id] {
            Node::Pred(e) => e.eval(self.signal.row(m)),
            Node::Not(ch) => -self.node_value(*ch, m)?,
            Node::And(chs) | Node::Or(chs) => {
                let is_and = matches!(self.nodes[id], Node::And(_));
                let chs = chs.clone();
                let ys = chs
                    .iter()
                    .map(|&ch| self.node_value(ch, m))
                    .collect::<Result<Vec<_>, _>>()?;
                self.note_inputs(&ys);
                aggregate(is_and, &ys, c)
            }
            Node::Implies(a, b) => {
                let (a, b) = (*a, *b);
                let ys = [-self.node_value(a, m)?, self.node_value(b, m)?];
                self.note_inputs(&ys);
                aggregate(false, &ys, c)
            }
            Node::Always(iv, ch) | Node::Eventually(iv, ch) => {
                let is_and = matches!(self.nodes[id], Node::Always(..));
                let (iv, ch) = (*iv, *ch);
                let ys = self
                    .window(m, iv)?
                    .map(|q| self.node_value(ch, q))
                    .collect::<Result<Vec<_>, _>>()?;
                self.note_inputs(&ys);
                aggregate(is_and, &ys, c)
            }
            Node::Until(iv, lhs, rhs) => {
                let (iv, lhs, rhs) = (*iv, *lhs, *rhs);
                let z = self.until_terms(m, iv, lhs, rhs)?;
                self.note_inputs(&z);
                aggregate(false, &z, c)
            }
        };
        self.memo[id][m] = Some(v);
        Ok(v)
    }

    /// `z_j = and(rhs(t_j), and(lhs(t_anchor..=t_j)))` for `j` in the window.
    fn until_terms(
        &mut self,
        anchor: usize,
        iv: Interval,
        lhs: usize,
        rhs: usize,
    ) -> Result<Vec<f64>, RobustnessError> {
        let win = self.window(anchor, iv)?;
        let prefix = (anchor..=*win.end())
            .map(|q| self.node_value(lhs, q))
            .collect::<Result<Vec<_>, _>>()?;
        let mut z = Vec::with_capacity(win.clone().count());
        for j in win {
            let held = &prefix[..=j - anchor];
            self.note_inputs(held);
            let w = aggregate(true, held, self.cfg.until_prefix);
            let pair = [self.node_value(rhs, j)?, w];
            self.note_inputs(&pair);
            z.push(aggregate(true, &pair, self.cfg.until_witness));
        }
        Ok(z)
    }

    /// Value and gradient of the root formula at `anchor`.
    pub fn robustness(&mut self, anchor: usize) -> Result<Robustness, RobustnessError> {
        self.min_abs_input = f64::INFINITY;
        for row in &mut self.memo {
            row.fill(None);
        }
        let value = self.value(anchor)?;
        let gradient = self.backward(anchor);
        Ok(Robustness {
            value,
            gradient,
            min_abs_input: self.min_abs_input,
        })
    }

    fn memo_value(&self, id: usize, m: usize) -> f64 {
        self.memo[id][m].expect("forward pass covers every backward read")
    }

    fn backward(&self, anchor: usize) -> Vec<f64> {
        let (len, width) = (self.signal.len(), self.signal.width());
        let c = self.cfg.c;
        let mut adj = vec![vec![0.0; len]; self.nodes.len()];
        adj[0][anchor] = 1.0;
        let mut grad = vec![0.0; len * width];
        let mut buf = Vec::new();

        for id in 0..self.nodes.len() {
            for m in 0..len {
                let a = adj[id][m];
                if a == 0.0 {
                    continue;
                }
                match &self.nodes[id] {
                    Node::Pred(e) => {
                        e.backprop(self.signal.row(m), a, &mut grad[m * width..(m + 1) * width])
                    }
                    Node::Not(ch) => adj[*ch][m] -= a,
                    Node::And(chs) | Node::Or(chs) => {
                        let is_and = matches!(self.nodes[id], Node::And(_));
                        let ys: Vec<f64> = chs.iter().map(|&ch| self.memo_value(ch, m)).collect();
                        aggregate_grad(is_and, &ys, c, &mut buf);
                        for (&ch, g) in chs.iter().zip(&buf) {
                            adj[ch][m] += a * g;
                        }
                    }
                    Node::Implies(l, r) => {
                        let ys = [-self.memo_value(*l, m), self.memo_value(*r, m)];
                        aggregate_grad(false, &ys, c, &mut buf);
                        adj[*l][m] -= a * buf[0];
                        adj[*r][m] += a * buf[1];
                    }
                    Node::Always(iv, ch) | Node::Eventually(iv, ch) => {
                        let is_and = matches!(self.nodes[id], Node::Always(..));
                        let win = self.window(m, *iv).expect("validated in forward pass");
                        let ys: Vec<f64> = win.clone().map(|q| self.memo_value(*ch, q)).collect();
                        aggregate_grad(is_and, &ys, c, &mut buf);
                        for (q, g) in win.zip(&buf) {
                            adj[*ch][q] += a * g;
                        }
                    }
                    Node::Until(iv, lhs, rhs) => {
                        let win = self.window(m, *iv).expect("validated in forward pass");
                        let prefix: Vec<f64> =
                            (m..=*win.end()).map(|q| self.memo_value(*lhs, q)).collect();
                        let mut z = Vec::new();
                        let mut pair_grads = Vec::new();
                        let mut prefix_grads = Vec::new();
                        for j in win.clone() {
                            let held = &prefix[..=j - m];
                            let mut gp = vec![0.0; held.len()];
                            let w = and_with_grad(held, self.cfg.until_prefix, &mut gp);
                            let mut g2 = [0.0; 2];
                            let zj = and_with_grad(
                                &[self.memo_value(*rhs, j), w],
                                self.cfg.until_witness,
                                &mut g2,
                            );
                            z.push(zj);
                            pair_grads.push(g2);
                            prefix_grads.push(gp);
                        }
                        aggregate_grad(false, &z, c, &mut buf);
                        for (k, j) in win.enumerate() {
                            let az = a * buf[k];
                            if az == 0.0 {
                                continue;
                            }
                            adj[*rhs][j] += az * pair_grads[k][0];
                            let aw = az * pair_grads[k][1];
                            for (off, g) in prefix_grads[k].iter().enumerate() {
                                adj[*lhs][m + off] += aw * g;
                            }
                        }
                    }
                }
            }
        }
        grad
    }
}

fn aggregate(is_and: bool, ys: &[f64], c: f64) -> f64 {
    if is_and {
        crate::gmsr::and_value(ys, c)
    } else {
        crate::gmsr::or_value(ys, c)
    }
}

fn aggregate_grad(is_and: bool, ys: &[f64], c: f64, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.resize(ys.len(), 0.0);
    if is_and {
        and_with_grad(ys, c, buf)
    } else {
        or_with_grad(ys, c, buf)
    }
}
