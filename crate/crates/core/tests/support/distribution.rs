//! Ordering checks on smooth aggregator gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use ctstl_core::gmsr::{gmsr_and, gmsr_or};

pub const C: f64 = 0.005;

pub fn random_vec(rng: &mut ChaCha8Rng, sign: f64) -> Vec<f64> {
    let n = rng.gen_range(2..=10);
    (0..n).map(|_| sign * rng.gen_range(0.05..5.0)).collect()
}

/// True when `|g|` is strictly decreasing in `key` over every pair with
/// distinct keys.
fn strictly_opposed(key: &[f64], g: &[f64]) -> bool {
    for i in 0..key.len() {
        for j in 0..key.len() {
            if key[i] < key[j] && !(g[i].abs() > g[j].abs()) {
                return false;
            }
        }
    }
    true
}

/// Counts ordering violations across all four sign/aggregator cases for
/// `trials` random vectors each.
pub fn violations(rng: &mut ChaCha8Rng, trials: usize) -> usize {
    let mut bad = 0;
    for _ in 0..trials {
        // conjunction, positive inputs: smaller margin, larger weight
        let y = random_vec(rng, 1.0);
        let (_, g) = gmsr_and(&y, C).unwrap();
        bad += !strictly_opposed(&y, &g) as usize;

        // conjunction, negative inputs: weight grows with |y|
        let y = random_vec(rng, -1.0);
        let (_, g) = gmsr_and(&y, C).unwrap();
        let key: Vec<f64> = y.iter().map(|v| -v.abs()).collect();
        bad += !strictly_opposed(&key, &g) as usize;

        // disjunction, positive inputs: weight grows with y
        let y = random_vec(rng, 1.0);
        let (_, g) = gmsr_or(&y, C).unwrap();
        let key: Vec<f64> = y.iter().map(|v| -v).collect();
        bad += !strictly_opposed(&key, &g) as usize;

        // disjunction, negative inputs: the least violated dominates
        let y = random_vec(rng, -1.0);
        let (_, g) = gmsr_or(&y, C).unwrap();
        let key: Vec<f64> = y.iter().map(|v| v.abs()).collect();
        bad += !strictly_opposed(&key, &g) as usize;
    }
    bad
}
