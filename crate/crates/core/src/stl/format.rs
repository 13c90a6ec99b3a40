use super::{Expr, Formula, Interval};

/// Renders a formula in the concrete syntax accepted by
/// [`parse_formula`](super::parse_formula). Every binary node is fully
/// parenthesized, so the output parses back to the same tree.
pub fn format_formula(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(f, &mut out);
    out
}

fn write_formula(f: &Formula, out: &mut String) {
    match f {
        Formula::Predicate(g) => {
            out.push('(');
            write_expr(g, out);
            out.push_str(" >= 0)");
        }
        Formula::Not(inner) => {
            out.push('!');
            write_formula(inner, out);
        }
        Formula::And(args) => write_nary(args, " & ", out),
        Formula::Or(args) => write_nary(args, " | ", out),
        Formula::Implies(a, b) => {
            out.push('(');
            write_formula(a, out);
            out.push_str(" -> ");
            write_formula(b, out);
            out.push(')');
        }
        Formula::Always(iv, inner) => {
            out.push('G');
            write_interval(iv, out);
            out.push(' ');
            write_formula(inner, out);
        }
        Formula::Eventually(iv, inner) => {
            out.push('F');
            write_interval(iv, out);
            out.push(' ');
            write_formula(inner, out);
        }
        Formula::Until(iv, a, b) => {
            out.push('(');
            write_formula(a, out);
            out.push_str(" U");
            write_interval(iv, out);
            out.push(' ');
            write_formula(b, out);
            out.push(')');
        }
    }
}

fn write_nary(args: &[Formula], sep: &str, out: &mut String) {
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        write_formula(a, out);
    }
    out.push(')');
}

fn write_interval(iv: &Interval, out: &mut String) {
    out.push('[');
    out.push_str(&number(iv.lo()));
    out.push(',');
    out.push_str(&number(iv.hi()));
    out.push(']');
}

fn number(v: f64) -> String {
    // Debug formatting is the shortest representation that round-trips.
    format!("{v:?}")
}

pub(crate) fn write_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Const(v) => {
            if v.is_sign_negative() {
                out.push('(');
                out.push_str(&number(*v));
                out.push(')');
            } else {
                out.push_str(&number(*v));
            }
        }
        Expr::Channel(name) => out.push_str(name),
        Expr::Neg(inner) => {
            out.push_str("-(");
            write_expr(inner, out);
            out.push(')');
        }
        Expr::Add(a, b) => write_binary(a, " + ", b, out),
        Expr::Sub(a, b) => write_binary(a, " - ", b, out),
        Expr::Mul(a, b) => write_binary(a, " * ", b, out),
        Expr::Pow(base, k) => {
            // Everything except `-(..)` and `..^k` already renders self-delimited.
            if !matches!(**base, Expr::Neg(_) | Expr::Pow(..)) {
                write_expr(base, out);
            } else {
                out.push('(');
                write_expr(base, out);
                out.push(')');
            }
            out.push('^');
            out.push_str(&k.to_string());
        }
    }
}

fn write_binary(a: &Expr, op: &str, b: &Expr, out: &mut String) {
    out.push('(');
    write_expr(a, out);
    out.push_str(op);
    write_expr(b, out);
    out.push(')');
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_pos() -> Formula {
        Formula::predicate(Expr::channel("x"))
    }

    #[test]
    fn atomic_predicate() {
        assert_eq!(format_formula(&x_pos()), "(x >= 0)");
    }

    #[test]
    fn negation() {
        assert_eq!(format_formula(&Formula::not(x_pos())), "!(x >= 0)");
    }

    #[test]
    fn nary_and_chain() {
        let f = Formula::and(vec![
            x_pos(),
            Formula::predicate(Expr::channel("y")),
            Formula::predicate(Expr::channel("z")),
        ]);
        assert_eq!(format_formula(&f), "((x >= 0) & (y >= 0) & (z >= 0))");
    }

    #[test]
    fn temporal_operators() {
        let iv = Interval::new(0.0, 2.5).unwrap();
        let f = Formula::until(iv, x_pos(), Formula::always(iv, x_pos()));
        assert_eq!(format_formula(&f), "((x >= 0) U[0.0,2.5] G[0.0,2.5] (x >= 0))");
    }

    #[test]
    fn negative_constants_are_parenthesized() {
        let mut s = String::new();
        write_expr(&Expr::pow(Expr::constant(-3.0), 2), &mut s);
        assert_eq!(s, "(-3.0)^2");
    }
}
