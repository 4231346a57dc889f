//! Globally adaptive Gauss–Legendre integration on a list of finite intervals.
//!
//! Each panel is integrated with one rule on the whole panel and once on each
//! half; the difference bounds the error of the refined value. The panel with
//! the largest error is bisected until the total error meets the tolerance.
//! Panels whose error is at the rounding floor of their absolute integral are
//! never refined further, which keeps cancelling integrands from stalling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::gauss;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub value: f64,
    pub error: f64,
    /// ∫|f|, used by callers to judge cancellation.
    pub abs_value: f64,
    pub subdivisions: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    abs_value: f64,
    error: f64,
    floor: f64,
}

impl Panel {
    fn excess(&self) -> f64 {
        (self.error - self.floor).max(0.0)
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.excess()
            .total_cmp(&other.excess())
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

const ROUNDING_FACTOR: f64 = 50.0 * f64::EPSILON;

fn evaluate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, order: usize) -> Result<Panel> {
    let mut bad = None;
    let mut g = |x: f64| {
        let v = f(x);
        if !v.is_finite() && bad.is_none() {
            bad = Some((x, v));
        }
        v
    };
    let (coarse, _) = gauss::apply(order, a, b, &mut g);
    let m = 0.5 * (a + b);
    let (left, left_abs) = gauss::apply(order, a, m, &mut g);
    let (right, right_abs) = gauss::apply(order, m, b, &mut g);
    if let Some((x, v)) = bad {
        return Err(Error::Domain(format!("integrand is {v} at {x}")));
    }
    let value = left + right;
    let abs_value = left_abs + right_abs;
    Ok(Panel {
        a,
        b,
        value,
        abs_value,
        error: (coarse - value).abs(),
        floor: ROUNDING_FACTOR * abs_value,
    })
}

/// Pairwise summation in a fixed order.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Integrate `f` over the union of the consecutive intervals in `breaks`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: Tolerance) -> Result<Outcome> {
    if breaks.len() < 2 {
        return Ok(Outcome {
            value: 0.0,
            error: 0.0,
            abs_value: 0.0,
            subdivisions: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            heap.push(evaluate(f, w[0], w[1], tol.order)?);
        }
    }
    let mut subdivisions = 0;
    loop {
        let (value, _, excess) = totals(heap.iter());
        let target = tol.abs.max(tol.rel * value.abs());
        if excess <= target {
            break;
        }
        let worst = match heap.peek() {
            Some(p) if p.excess() > 0.0 => *p,
            _ => break,
        };
        if subdivisions >= tol.max_subdivisions {
            let (value, error, _) = totals(heap.iter());
            return Err(Error::Accuracy {
                estimate: value,
                error,
                subdivisions,
            });
        }
        heap.pop();
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            // interval exhausted at machine resolution; accept it as is
            heap.push(Panel {
                floor: worst.error,
                ..worst
            });
            continue;
        }
        heap.push(evaluate(f, worst.a, m, tol.order)?);
        heap.push(evaluate(f, m, worst.b, tol.order)?);
        subdivisions += 1;
    }
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let values: Vec<f64> = panels.iter().map(|p| p.value).collect();
    let errors: Vec<f64> = panels.iter().map(|p| p.error).collect();
    let abs: Vec<f64> = panels.iter().map(|p| p.abs_value).collect();
    Ok(Outcome {
        value: pairwise_sum(&values),
        error: pairwise_sum(&errors),
        abs_value: pairwise_sum(&abs),
        subdivisions,
    })
}

fn totals<'a>(panels: impl Iterator<Item = &'a Panel>) -> (f64, f64, f64) {
    panels.fold((0.0, 0.0, 0.0), |(v, e, x), p| {
        (v + p.value, e + p.error, x + p.excess())
    })
}
