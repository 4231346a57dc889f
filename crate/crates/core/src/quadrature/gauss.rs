//! Gauss–Legendre rules on [-1, 1], computed once per order and cached.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

#[derive(Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre P_n and its derivative at x by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    GaussRule { nodes, weights }
}

/// The n-point rule, shared for the lifetime of the process.
pub fn rule(n: usize) -> &'static GaussRule {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("gauss rule cache poisoned");
    map.entry(n)
        .or_insert_with(|| Box::leak(Box::new(compute(n))))
}

/// Apply the n-point rule on [a, b].
pub fn apply<F: FnMut(f64) -> f64>(n: usize, a: f64, b: f64, mut f: F) -> (f64, f64) {
    let r = rule(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut sum = 0.0;
    let mut abs = 0.0;
    for (x, w) in r.nodes.iter().zip(&r.weights) {
        let v = w * f(c + h * x);
        sum += v;
        abs += v.abs();
    }
    (sum * h, abs * h.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 30, 40, 64] {
            let s: f64 = rule(n).weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        // order n integrates degree 2n-1 exactly
        let (v, _) = apply(30, 0.0, 1.0, |x| x.powi(59));
        assert!((v - 1.0 / 60.0).abs() < 1e-14);
        let (v, _) = apply(3, -1.0, 2.0, |x| x.powi(5) - x * x);
        assert!((v - (64.0 / 6.0 - 1.0 / 6.0 - 3.0)).abs() < 1e-13);
    }

    #[test]
    fn smooth_integrand() {
        let (v, _) = apply(30, 0.0, PI, f64::sin);
        assert!((v - 2.0).abs() < 1e-14);
    }
}
