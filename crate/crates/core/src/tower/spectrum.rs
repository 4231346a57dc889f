//! Linearized spectrum at the Hardy instanton: -Δφ - μφ/r² = Λ V₁^{2*-2} φ.
//!
//! With t = ln r and φ = r^{-(N-2)/2} v the problem becomes the symmetric
//! Sturm-Liouville pencil -v'' + (μ̄-μ)v = Λ w(t) v with
//! w = N(μ̄-μ) / ((N-2) cosh²(bt)), b = √(1 - μ/μ̄).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{critical_exponent, half_weight, mu_bar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSettings {
    pub r_min: f64,
    pub r_max: f64,
    pub nodes: usize,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self {
            r_min: 1e-6,
            r_max: 1e3,
            nodes: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub dim: usize,
    pub mu: f64,
    /// Λ₁, Λ₂ on `nodes` and on 2·`nodes` interior points.
    pub coarse: [f64; 2],
    pub fine: [f64; 2],
    /// Richardson extrapolation (4·fine - coarse)/3.
    pub extrapolated: [f64; 2],
    /// |fine - coarse|/3.
    pub error_bar: [f64; 2],
    /// Cosine between the discrete first eigenvector and r^{(N-2)/2}V₁.
    pub eigenvector_cosine: f64,
    /// 1 and (N+2)/(N-2).
    pub exact: [f64; 2],
}

struct Pencil {
    /// Diagonal of A (off-diagonal is the constant -1/h²).
    diag: f64,
    off: f64,
    weight: Vec<f64>,
    ts: Vec<f64>,
}

impl Pencil {
    fn new(dim: usize, mu: f64, settings: &SpectrumSettings, nodes: usize) -> Self {
        let mb = mu_bar(dim);
        let n = dim as f64;
        let b = (1.0 - mu / mb).sqrt();
        let (t0, t1) = (settings.r_min.ln(), settings.r_max.ln());
        let h = (t1 - t0) / (nodes + 1) as f64;
        let ts: Vec<f64> = (1..=nodes).map(|j| t0 + h * j as f64).collect();
        let amp = n * (mb - mu) / (n - 2.0);
        Self {
            diag: 2.0 / (h * h) + (mb - mu),
            off: -1.0 / (h * h),
            weight: ts.iter().map(|t| amp / (b * t).cosh().powi(2)).collect(),
            ts,
        }
    }

    /// Number of eigenvalues below `lambda`: negative pivots of A - λB.
    fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut d = 0.0;
        for (j, w) in self.weight.iter().enumerate() {
            let a = self.diag - lambda * w;
            d = if j == 0 {
                a
            } else {
                a - self.off * self.off / d
            };
            if d == 0.0 {
                d = -f64::EPSILON * self.diag;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `index`-th eigenvalue (1-based) by bisection on the inertia count.
    fn eigenvalue(&self, index: usize) -> Result<f64> {
        let mut hi = 4.0;
        while self.count_below(hi) < index {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Degenerate("no eigenvalue found below 1e12".into()));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-13 * hi {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) >= index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Inverse iteration for the eigenvector at the shift `lambda`.
    fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let len = self.weight.len();
        let shift = lambda * (1.0 - 1e-10);
        let mut v = vec![1.0; len];
        for _ in 0..5 {
            let rhs: Vec<f64> = v.iter().zip(&self.weight).map(|(x, w)| x * w).collect();
            v = self.solve_shifted(shift, &rhs);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    /// Thomas algorithm for (A - shift·B) x = rhs.
    fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let len = rhs.len();
        let mut c = vec![0.0; len];
        let mut d = vec![0.0; len];
        for j in 0..len {
            let a = self.diag - shift * self.weight[j];
            let denom = if j == 0 { a } else { a - self.off * c[j - 1] };
            c[j] = self.off / denom;
            d[j] = if j == 0 {
                rhs[0] / denom
            } else {
                (rhs[j] - self.off * d[j - 1]) / denom
            };
        }
        let mut x = vec![0.0; len];
        x[len - 1] = d[len - 1];
        for j in (0..len - 1).rev() {
            x[j] = d[j] - c[j] * x[j + 1];
        }
        x
    }
}

/// The two smallest eigenvalues of the linearization at V₁.
pub fn spectrum_check(dim: usize, mu: f64, settings: &SpectrumSettings) -> Result<SpectrumReport> {
    let mb = mu_bar(dim);
    if !(mu > 0.0 && mu < mb) {
        return Err(Error::Domain(format!(
            "spectrum needs 0 < mu < {mb}, got {mu}"
        )));
    }
    if !(settings.r_min > 0.0 && settings.r_max > settings.r_min) || settings.nodes < 10 {
        return Err(Error::Domain(
            "spectrum grid needs 0 < r_min < r_max and at least 10 nodes".into(),
        ));
    }
    let coarse_p = Pencil::new(dim, mu, settings, settings.nodes);
    let fine_p = Pencil::new(dim, mu, settings, 2 * settings.nodes);
    let coarse = [coarse_p.eigenvalue(1)?, coarse_p.eigenvalue(2)?];
    let fine = [fine_p.eigenvalue(1)?, fine_p.eigenvalue(2)?];
    let extrapolated = [0, 1].map(|j| (4.0 * fine[j] - coarse[j]) / 3.0);
    let error_bar = [0, 1].map(|j| (fine[j] - coarse[j]).abs() / 3.0);
    // r^m V₁ = C_μ (2 cosh(bt))^{-m}; the constant drops out of the cosine
    let b = (1.0 - mu / mb).sqrt();
    let m = half_weight(dim);
    let exact_vec: Vec<f64> = fine_p.ts.iter().map(|t| (b * t).cosh().powf(-m)).collect();
    let vec = fine_p.eigenvector(fine[0]);
    let dot: f64 = vec.iter().zip(&exact_vec).map(|(a, b)| a * b).sum();
    let norm = exact_vec.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(SpectrumReport {
        dim,
        mu,
        coarse,
        fine,
        extrapolated,
        error_bar,
        eigenvector_cosine: dot.abs() / norm,
        exact: [1.0, critical_exponent(dim) - 1.0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_two_eigenvalues() {
        for mu in [0.1, 0.5, 2.0] {
            let r = spectrum_check(7, mu, &SpectrumSettings::default()).unwrap();
            assert!((r.extrapolated[0] - 1.0).abs() < 1e-3);
            assert!((r.extrapolated[1] - 1.8).abs() < 2e-3);
            assert!((r.fine[0] - r.coarse[0]).abs() < 1e-3);
            assert!((r.fine[1] - r.coarse[1]).abs() < 1e-3);
            assert!(r.eigenvector_cosine >= 0.999);
        }
    }

    #[test]
    fn rejects_bad_mu() {
        let s = SpectrumSettings::default();
        assert!(spectrum_check(7, 0.0, &s).is_err());
        assert!(spectrum_check(7, 6.25, &s).is_err());
    }

    #[test]
    fn deterministic() {
        let s = SpectrumSettings {
            nodes: 500,
            ..Default::default()
        };
        let a = spectrum_check(7, 0.5, &s).unwrap();
        let b = spectrum_check(7, 0.5, &s).unwrap();
        assert_eq!(a, b);
    }
}
