//! Random formulas and signals for differential testing against the
//! min/max semantics.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use ctstl_core::stl::Expr;
use ctstl_core::{Formula, Interval, Signal};

pub const CHANNELS: [&str; 3] = ["a", "b", "c"];
pub const DT: f64 = 0.5;

fn predicate(rng: &mut ChaCha8Rng) -> Formula {
    let ch = Expr::channel(CHANNELS[rng.gen_range(0..CHANNELS.len())]);
    let offset = Expr::constant((rng.gen_range(-1.0..1.0) * 4.0f64).round() / 4.0);
    let g = match rng.gen_range(0..4) {
        0 => ch,
        1 => Expr::sub(ch, offset),
        2 => Expr::add(Expr::mul(Expr::constant(rng.gen_range(0.5..2.0)), ch), offset),
        _ => Expr::sub(offset, Expr::pow(ch, 2)),
    };
    Formula::predicate(g)
}

fn interval(rng: &mut ChaCha8Rng) -> Interval {
    let lo = rng.gen_range(0..3) as f64 * DT;
    let hi = lo + rng.gen_range(0..4) as f64 * DT;
    Interval::new(lo, hi).unwrap()
}

/// Formula of depth at most `depth` (a predicate has depth 1).
pub fn formula(rng: &mut ChaCha8Rng, depth: usize) -> Formula {
    if depth <= 1 || rng.gen_bool(0.25) {
        return predicate(rng);
    }
    let sub = |rng: &mut ChaCha8Rng| formula(rng, depth - 1);
    match rng.gen_range(0..8) {
        0 => Formula::not(sub(rng)),
        1 => {
            let n = rng.gen_range(2..=3);
            Formula::and((0..n).map(|_| sub(rng)).collect())
        }
        2 => {
            let n = rng.gen_range(2..=3);
            Formula::or((0..n).map(|_| sub(rng)).collect())
        }
        3 => Formula::implies(sub(rng), sub(rng)),
        4 => Formula::always(interval(rng), sub(rng)),
        5 => Formula::eventually(interval(rng), sub(rng)),
        _ => Formula::until(interval(rng), sub(rng), sub(rng)),
    }
}

/// Signal on the grid `k * DT` long enough for `horizon`, at most `max_len`
/// samples. Returns `None` if the horizon does not fit.
pub fn signal(rng: &mut ChaCha8Rng, horizon: f64, max_len: usize) -> Option<Signal> {
    let need = (horizon / DT).round() as usize + 1;
    if need > max_len {
        return None;
    }
    let len = rng.gen_range(need..=max_len);
    let times = (0..len).map(|k| k as f64 * DT).collect();
    let data = (0..len * CHANNELS.len())
        .map(|_| {
            // a sprinkling of exact zeros and tiny values exercises the boundary
            match rng.gen_range(0..20) {
                0 => 0.0,
                1 => rng.gen_range(-1e-6..1e-6),
                _ => rng.gen_range(-2.0..2.0),
            }
        })
        .collect();
    Some(Signal::new(times, CHANNELS.iter().map(|s| s.to_string()).collect(), data).unwrap())
}

/// A `(formula, signal)` pair with depth <= `depth` and at most `max_len`
/// samples.
pub fn pair(rng: &mut ChaCha8Rng, depth: usize, max_len: usize) -> (Formula, Signal) {
    loop {
        let f = formula(rng, depth);
        if let Some(s) = signal(rng, f.horizon(), max_len) {
            return (f, s);
        }
    }
}
