use super::{EvalError, Formula, IndexedExpr, Interval};

/// Flattened formula: node 0 is the root and every child id is larger than
/// its parent's.
#[derive(Debug, Clone)]
pub(crate) enum Node {
    Pred(IndexedExpr),
    Not(usize),
    And(Vec<usize>),
    Or(Vec<usize>),
    Implies(usize, usize),
    Always(Interval, usize),
    Eventually(Interval, usize),
    Until(Interval, usize, usize),
}

pub(crate) fn compile(
    f: &Formula,
    resolve: &dyn Fn(&str) -> Option<usize>,
) -> Result<Vec<Node>, EvalError> {
    let mut nodes = Vec::new();
    push(f, resolve, &mut nodes)?;
    Ok(nodes)
}

fn push(
    f: &Formula,
    resolve: &dyn Fn(&str) -> Option<usize>,
    nodes: &mut Vec<Node>,
) -> Result<usize, EvalError> {
    let id = nodes.len();
    // placeholder, patched once the children have ids
    nodes.push(Node::Not(usize::MAX));
    let node = match f {
        Formula::Predicate(e) => Node::Pred(e.compile(resolve)?),
        Formula::Not(g) => Node::Not(push(g, resolve, nodes)?),
        Formula::And(args) => Node::And(
            args.iter()
                .map(|g| push(g, resolve, nodes))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Or(args) => Node::Or(
            args.iter()
                .map(|g| push(g, resolve, nodes))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Implies(a, b) => {
            let a = push(a, resolve, nodes)?;
            Node::Implies(a, push(b, resolve, nodes)?)
        }
        Formula::Always(iv, g) => Node::Always(*iv, push(g, resolve, nodes)?),
        Formula::Eventually(iv, g) => Node::Eventually(*iv, push(g, resolve, nodes)?),
        Formula::Until(iv, a, b) => {
            let a = push(a, resolve, nodes)?;
            Node::Until(*iv, a, push(b, resolve, nodes)?)
        }
    };
    nodes[id] = node;
    Ok(id)
}
