//! Critical points of the reduced energy ψ̂(s, ζ): the closed-form ladder ŝ(ζ),
//! the functions g_i, and a damped Newton refinement with a nondegeneracy
//! certificate.

use std::cell::RefCell;
use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::energy::{lambda_from_s, psi_hat_gradient_s, zeta_moments, EnergyCoefficients};
use crate::error::{Error, Result};
use crate::quadrature::{zeta_moment, MomentTable, QuadratureSpec, ZetaDerivatives, ZetaKernel};

pub const MAX_ITERATIONS: usize = 50;
pub const MAX_HALVINGS: usize = 30;
/// Convergence when ‖∇ψ̂‖ ≤ GRADIENT_TOL·(|b₁| + |b₄|).
pub const GRADIENT_TOL: f64 = 1e-10;
/// Step of the finite-difference Hessian of g_i.
pub const G_FD_STEP: f64 = 1e-3;

fn check_coeffs(coeffs: &EnergyCoefficients) -> Result<()> {
    if !(coeffs.b1 > 0.0 && coeffs.b2 > 0.0 && coeffs.b4 > 0.0) {
        return Err(Error::Degenerate(format!(
            "b1, b2, b4 must be positive (got {}, {}, {})",
            coeffs.b1, coeffs.b2, coeffs.b4
        )));
    }
    Ok(())
}

fn ladder(coeffs: &EnergyCoefficients, h1: &[f64]) -> Result<Vec<f64>> {
    check_coeffs(coeffs)?;
    let k = coeffs.k;
    let mut s = vec![((k + 1) as f64 * coeffs.b4 / (2.0 * coeffs.b1)).sqrt()];
    for i in 1..=k {
        let h = h1[i - 1];
        if !(h > 0.0) {
            return Err(Error::Degenerate(format!(
                "h1(zeta_{i}) = {h} is not positive"
            )));
        }
        s.push((k + 1 - i) as f64 * coeffs.b4 / (coeffs.b2 * h));
    }
    Ok(s)
}

/// ŝ₁ = √((k+1)b₄/(2b₁)), ŝ_{i+1} = (k+1-i)b₄/(b₂h₁(ζ_i)).
pub fn s_hat(
    zeta: &[Vec<f64>],
    coeffs: &EnergyCoefficients,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    if zeta.len() != coeffs.k {
        return Err(Error::Domain(format!(
            "expected {} zeta points, got {}",
            coeffs.k,
            zeta.len()
        )));
    }
    let (h1, _) = zeta_moments(coeffs, zeta, spec)?;
    ladder(coeffs, &h1)
}

fn check_index(i: usize, coeffs: &EnergyCoefficients) -> Result<()> {
    if i == 0 || i > coeffs.k {
        return Err(Error::Index(format!(
            "g index {i} outside 1..={}",
            coeffs.k
        )));
    }
    Ok(())
}

/// g_i(ζ) = b₄(k+1-i) ln h₁(ζ) - b₃h₂(ζ); ψ̂(ŝ(ζ), ζ) = const + Σg_i(ζ_i).
pub fn g_eval(
    i: usize,
    zeta: &[f64],
    coeffs: &EnergyCoefficients,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_index(i, coeffs)?;
    let (h1, h2) = zeta_moments(coeffs, &[zeta.to_vec()], spec)?;
    Ok(coeffs.b4 * (coeffs.k + 1 - i) as f64 * h1[0].ln() - coeffs.b3 * h2[0])
}

/// g_i sampled on the ray ζ = ρe₁, ρ ∈ [0, 1/η]. Exploratory only.
pub fn g_ray(
    i: usize,
    eta: f64,
    count: usize,
    coeffs: &EnergyCoefficients,
    spec: &QuadratureSpec,
) -> Result<Vec<(f64, f64)>> {
    if count < 2 || !(eta > 0.0) {
        return Err(Error::Domain("ray needs count >= 2 and eta > 0".into()));
    }
    (0..count)
        .map(|j| {
            let rho = j as f64 / (count - 1) as f64 / eta;
            let mut z = vec![0.0; coeffs.dim];
            z[0] = rho;
            Ok((rho, g_eval(i, &z, coeffs, spec)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GHessian {
    pub i: usize,
    /// (2N-8)/N·b₃·∫|y|^{-4}(1+|y|²)^{-(N-2)}, the b₃ term alone.
    pub closed_form: f64,
    /// closed_form - (N-2)(k+1-i)b₄, which adds the curvature of b₄(k+1-i) ln h₁.
    pub corrected: f64,
    /// Central differences of g_i at 0, row-major N×N.
    pub finite_difference: Vec<Vec<f64>>,
}

impl GHessian {
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.finite_difference.len())
            .map(|j| self.finite_difference[j][j])
            .collect()
    }

    /// max |off-diagonal| / max |diagonal|.
    pub fn off_diagonal_ratio(&self) -> f64 {
        let n = self.finite_difference.len();
        let diag = self.diagonal().iter().fold(0.0f64, |a, d| a.max(d.abs()));
        let mut off = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    off = off.max(self.finite_difference[a][b].abs());
                }
            }
        }
        off / diag
    }

    /// Relative spread of the diagonal entries.
    pub fn diagonal_spread(&self) -> f64 {
        let d = self.diagonal();
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / hi.abs().max(lo.abs())
    }

    /// Worst relative gap between `reference` and the finite-difference diagonal.
    pub fn relative_gap(&self, reference: f64) -> f64 {
        self.diagonal().iter().fold(0.0f64, |a, d| {
            a.max((d - reference).abs() / reference.abs())
        })
    }
}

pub fn g_hessian_at_zero(
    i: usize,
    coeffs: &EnergyCoefficients,
    moments: &MomentTable,
    spec: &QuadratureSpec,
) -> Result<GHessian> {
    check_index(i, coeffs)?;
    let n = coeffs.dim;
    let nf = n as f64;
    let closed_form = (2.0 * nf - 8.0) / nf * coeffs.b3 * moments.curvature;
    let corrected = closed_form - (nf - 2.0) * (coeffs.k + 1 - i) as f64 * coeffs.b4;
    let spec = spec.with_rel_tol(spec.rel_tol.min(1e-13));
    let h = G_FD_STEP;
    // the moments only see |ζ|, so the stencil needs three distinct radii
    let cache = RefCell::new(HashMap::<u64, f64>::new());
    let g = |pairs: &[(usize, f64)]| -> Result<f64> {
        let mut z = vec![0.0; n];
        for &(j, v) in pairs {
            z[j] += v;
        }
        let key = norm(&z).to_bits();
        if let Some(v) = cache.borrow().get(&key) {
            return Ok(*v);
        }
        let v = g_eval(i, &z, coeffs, &spec)?;
        cache.borrow_mut().insert(key, v);
        Ok(v)
    };
    let g0 = g(&[])?;
    let mut fd = vec![vec![0.0; n]; n];
    #[allow(clippy::needless_range_loop)]
    for a in 0..n {
        fd[a][a] = (g(&[(a, h)])? - 2.0 * g0 + g(&[(a, -h)])?) / (h * h);
        for b in a + 1..n {
            let v = (g(&[(a, h), (b, h)])? - g(&[(a, h), (b, -h)])? - g(&[(a, -h), (b, h)])?
                + g(&[(a, -h), (b, -h)])?)
                / (4.0 * h * h);
            fd[a][b] = v;
            fd[b][a] = v;
        }
    }
    Ok(GHessian {
        i,
        closed_form,
        corrected,
        finite_difference: fd,
    })
}

/// Layout of the unknowns: s₁..s_{k+1}, then ζ₁..ζ_k (N entries each).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedPoint {
    pub s: Vec<f64>,
    pub zeta: Vec<Vec<f64>>,
}

impl ReducedPoint {
    fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.s.len() + self.zeta.iter().map(Vec::len).sum::<usize>(),
            self.s.iter().chain(self.zeta.iter().flatten()).copied(),
        )
    }

    fn from_vector(x: &DVector<f64>, k: usize, dim: usize) -> Self {
        let s = x.rows(0, k + 1).iter().copied().collect();
        let zeta = (0..k)
            .map(|i| x.rows(k + 1 + i * dim, dim).iter().copied().collect())
            .collect();
        Self { s, zeta }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

struct Local {
    h1: Vec<ZetaDerivatives>,
    h2: Vec<ZetaDerivatives>,
}

fn local(
    point: &ReducedPoint,
    coeffs: &EnergyCoefficients,
    spec: &QuadratureSpec,
) -> Result<Local> {
    let mut h1 = Vec::with_capacity(coeffs.k);
    let mut h2 = Vec::with_capacity(coeffs.k);
    for z in &point.zeta {
        let rho = norm(z);
        h1.push(zeta_moment(
            coeffs.dim,
            ZetaKernel::h1(coeffs.dim),
            rho,
            spec,
        )?);
        h2.push(zeta_moment(
            coeffs.dim,
            ZetaKernel::h2(coeffs.dim),
            rho,
            spec,
        )?);
    }
    Ok(Local { h1, h2 })
}

/// Full gradient of ψ̂ in (s, ζ), ζ-derivatives differentiated under the integral.
pub fn psi_hat_gradient(
    point: &ReducedPoint,
    coeffs: &EnergyCoefficients,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let loc = local(point, coeffs, spec)?;
    Ok(gradient_from(point, coeffs, &loc))
}

fn gradient_from(point: &ReducedPoint, coeffs: &EnergyCoefficients, loc: &Local) -> Vec<f64> {
    let h1: Vec<f64> = loc.h1.iter().map(|d| d.value).collect();
    let mut g = psi_hat_gradient_s(&point.s, &h1, coeffs);
    for (i, z) in point.zeta.iter().enumerate() {
        let g1 = loc.h1[i].gradient(z);
        let g2 = loc.h2[i].gradient(z);
        g.extend(
            g1.iter()
                .zip(&g2)
                .map(|(a, b)| coeffs.b2 * point.s[i + 1] * a - coeffs.b3 * b),
        );
    }
    g
}

/// Full Hessian of ψ̂ in (s, ζ).
pub fn psi_hat_hessian(
    point: &ReducedPoint,
    coeffs: &EnergyCoefficients,
    spec: &QuadratureSpec,
) -> Result<DMatrix<f64>> {
    let loc = local(point, coeffs, spec)?;
    Ok(hessian_from(point, coeffs, &loc))
}

fn hessian_from(point: &ReducedPoint, coeffs: &EnergyCoefficients, loc: &Local) -> DMatrix<f64> {
    let k = coeffs.k;
    let n = coeffs.dim;
    let size = k + 1 + k * n;
    let mut h = DMatrix::zeros(size, size);
    h[(0, 0)] = 2.0 * coeffs.b1 + (k + 1) as f64 * coeffs.b4 / (point.s[0] * point.s[0]);
    for i in 1..=k {
        let s = point.s[i];
        h[(i, i)] = (k + 1 - i) as f64 * coeffs.b4 / (s * s);
        let z = &point.zeta[i - 1];
        let off = k + 1 + (i - 1) * n;
        let grad = loc.h1[i - 1].gradient(z);
        for (j, gj) in grad.iter().enumerate() {
            h[(i, off + j)] = coeffs.b2 * gj;
            h[(off + j, i)] = coeffs.b2 * gj;
        }
        let block =
            loc.h1[i - 1].hessian(z) * (coeffs.b2 * s) - loc.h2[i - 1].hessian(z) * coeffs.b3;
        h.view_mut((off, off), (n, n)).copy_from(&block);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianCertificate {
    /// Smallest singular value of the full ψ̂ Hessian at the critical point.
    pub min_singular_value: f64,
    /// Eigenvalues of ∇²g_i(ζ_i*) for each i.
    pub g_spectra: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub s_hat: Vec<f64>,
    pub zeta_star: Vec<Vec<f64>>,
    pub lambda_star: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub hessian_certificate: HessianCertificate,
    /// ‖∇ψ̂‖ at every iterate.
    pub trajectory: Vec<f64>,
}

fn g_spectrum(
    i: usize,
    point: &ReducedPoint,
    coeffs: &EnergyCoefficients,
    loc: &Local,
) -> Vec<f64> {
    let z = &point.zeta[i - 1];
    let d1 = &loc.h1[i - 1];
    let grad = DVector::from_vec(d1.gradient(z));
    let w = (coeffs.k + 1 - i) as f64 * coeffs.b4;
    let hess = (d1.hessian(z) / d1.value - &grad * grad.transpose() / (d1.value * d1.value)) * w
        - loc.h2[i - 1].hessian(z) * coeffs.b3;
    let mut ev: Vec<f64> = SymmetricEigen::new(hess)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Damped Newton on ∇ψ̂ = 0 with ‖∇ψ̂‖ as merit function.
pub fn newton_refine(
    start: &ReducedPoint,
    coeffs: &EnergyCoefficients,
    spec: &QuadratureSpec,
) -> Result<CriticalPoint> {
    check_coeffs(coeffs)?;
    let k = coeffs.k;
    if start.s.len() != k + 1
        || start.zeta.len() != k
        || start.zeta.iter().any(|z| z.len() != coeffs.dim)
    {
        return Err(Error::Domain(format!(
            "start must have {} s-values and {k} zeta points of dimension {}",
            k + 1,
            coeffs.dim
        )));
    }
    if start.s.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain(
            "start lies outside the positive s-orthant".into(),
        ));
    }
    let tol = GRADIENT_TOL * coeffs.scale();
    let mut point = start.clone();
    let mut loc = local(&point, coeffs, spec)?;
    let mut grad = gradient_from(&point, coeffs, &loc);
    let mut gnorm = norm(&grad);
    let mut trajectory = vec![gnorm];
    let mut iterations = 0;
    while gnorm > tol {
        if iterations == MAX_ITERATIONS {
            return Err(Error::NonConvergence {
                iterations,
                residual: gnorm,
                trajectory,
            });
        }
        iterations += 1;
        let hess = hessian_from(&point, coeffs, &loc);
        let step = hess
            .lu()
            .solve(&-DVector::from_vec(grad.clone()))
            .ok_or_else(|| Error::Degenerate("singular Newton matrix".into()))?;
        let x = point.to_vector();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = ReducedPoint::from_vector(&(&x + &step * t), k, coeffs.dim);
            if trial.s.iter().all(|&v| v > 0.0) {
                let tl = local(&trial, coeffs, spec)?;
                let tg = gradient_from(&trial, coeffs, &tl);
                let tn = norm(&tg);
                if tn < gnorm {
                    accepted = Some((trial, tl, tg, tn));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((p, l, g, n)) = accepted else {
            return Err(Error::NonConvergence {
                iterations,
                residual: gnorm,
                trajectory,
            });
        };
        point = p;
        loc = l;
        grad = g;
        gnorm = n;
        trajectory.push(gnorm);
    }
    let hess = hessian_from(&point, coeffs, &loc);
    let min_sv = hess
        .singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(min_sv > 1e-12 * coeffs.scale()) {
        return Err(Error::Degenerate(format!(
            "critical point Hessian has singular value {min_sv:e}"
        )));
    }
    let g_spectra = (1..=k)
        .map(|i| g_spectrum(i, &point, coeffs, &loc))
        .collect();
    Ok(CriticalPoint {
        lambda_star: lambda_from_s(&point.s, coeffs.dim)?,
        s_hat: point.s,
        zeta_star: point.zeta,
        iterations,
        gradient_norm: gnorm,
        hessian_certificate: HessianCertificate {
            min_singular_value: min_sv,
            g_spectra,
        },
        trajectory,
    })
}

/// Newton started exactly at (ŝ(0), 0).
pub fn critical_point(coeffs: &EnergyCoefficients, spec: &QuadratureSpec) -> Result<CriticalPoint> {
    let zeta = vec![vec![0.0; coeffs.dim]; coeffs.k];
    let s = s_hat(&zeta, coeffs, spec)?;
    newton_refine(&ReducedPoint { s, zeta }, coeffs, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ModelParams;
    use std::sync::OnceLock;

    fn table() -> &'static MomentTable {
        static T: OnceLock<MomentTable> = OnceLock::new();
        T.get_or_init(|| MomentTable::compute(7, 0.0, &QuadratureSpec::default()).unwrap())
    }

    fn coeffs(k: usize) -> EnergyCoefficients {
        EnergyCoefficients::compute(&ModelParams::new(7, 1.0, k, 0.1).unwrap(), table()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn ladder_is_stationary() {
        let spec = QuadratureSpec::default();
        for k in 0..3 {
            let c = coeffs(k);
            let zeta = vec![vec![0.0; 7]; k];
            let s = s_hat(&zeta, &c, &spec).unwrap();
            let g = psi_hat_gradient_s(&s, &vec![c.h1_zero; k], &c);
            for (j, v) in g.iter().enumerate() {
                assert!(v.abs() <= 1e-12 * c.scale(), "k={k} component {j}: {v}");
            }
        }
        let c = coeffs(2);
        let s = s_hat(&[vec![0.0; 7], vec![0.0; 7]], &c, &spec).unwrap();
        assert!(rel(s[1] / s[2], 2.0) < 1e-14);
        let c = coeffs(0);
        let s = s_hat(&[], &c, &spec).unwrap();
        assert!(rel(s[0], (c.b4 / (2.0 * c.b1)).sqrt()) < 1e-15);
        let lam = lambda_from_s(&s, 7).unwrap();
        assert!(rel(lam[0], s[0].powf(0.4)) < 1e-14);
    }

    #[test]
    fn ladder_stationary_off_zero() {
        let spec = QuadratureSpec::default();
        let c = coeffs(2);
        let zeta = vec![
            vec![0.3, -0.2, 0.0, 0.1, 0.0, 0.0, 0.4],
            vec![0.0, 0.0, 1.1, 0.0, 0.0, 0.0, 0.0],
        ];
        let s = s_hat(&zeta, &c, &spec).unwrap();
        let (h1, _) = zeta_moments(&c, &zeta, &spec).unwrap();
        for v in psi_hat_gradient_s(&s, &h1, &c) {
            assert!(v.abs() <= 1e-12 * c.scale());
        }
    }

    #[test]
    fn g_is_even_and_flat_at_zero() {
        let spec = QuadratureSpec::default();
        let c = coeffs(1);
        let z = [0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let zm: Vec<f64> = z.iter().map(|v| -v).collect();
        let a = g_eval(1, &z, &c, &spec).unwrap();
        let b = g_eval(1, &zm, &c, &spec).unwrap();
        assert!(rel(a, b) < 1e-12);
        let g0 = g_eval(1, &[0.0; 7], &c, &spec).unwrap();
        assert!(rel(g0, c.b4 * c.h1_zero.ln() - c.b3 * c.h2_zero) < 1e-14);
        let h = 1e-4;
        for j in 0..7 {
            let mut p = [0.0; 7];
            p[j] = h;
            let mut m = [0.0; 7];
            m[j] = -h;
            let d =
                (g_eval(1, &p, &c, &spec).unwrap() - g_eval(1, &m, &c, &spec).unwrap()) / (2.0 * h);
            assert!(d.abs() <= 1e-6 * c.scale());
        }
        assert!(g_eval(2, &[0.0; 7], &c, &spec).is_err());
    }

    #[test]
    fn g_hessian_matches_corrected_form() {
        let spec = QuadratureSpec::default();
        let c = coeffs(1);
        let h = g_hessian_at_zero(1, &c, table(), &spec).unwrap();
        assert!(rel(h.closed_form, 6.0 / 7.0 * c.b3 * 2.029356) < 1e-6);
        assert!(h.off_diagonal_ratio() < 1e-5);
        assert!(h.diagonal_spread() < 1e-6);
        assert!(h.relative_gap(h.corrected) < 1e-4);
    }

    #[test]
    fn newton_from_perturbed_start() {
        let spec = QuadratureSpec::default();
        let c = coeffs(1);
        let exact = critical_point(&c, &spec).unwrap();
        assert_eq!(exact.iterations, 0);
        let mut z = vec![0.0; 7];
        z[0] = 0.05;
        let start = ReducedPoint {
            s: exact.s_hat.iter().map(|v| 1.1 * v).collect(),
            zeta: vec![z],
        };
        let cp = newton_refine(&start, &c, &spec).unwrap();
        assert!(cp.iterations <= 15);
        for (a, b) in cp.s_hat.iter().zip(&exact.s_hat) {
            assert!(rel(*a, *b) < 1e-10);
        }
        assert!(norm(&cp.zeta_star[0]) < 1e-10);
        assert!(cp.hessian_certificate.min_singular_value > 1e-6 * c.scale());
        let bad = ReducedPoint {
            s: vec![-1.0, 1.0],
            zeta: vec![vec![0.0; 7]],
        };
        assert!(matches!(
            newton_refine(&bad, &c, &spec),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn lambda_star_in_box() {
        let spec = QuadratureSpec::default();
        for k in 0..2 {
            let cp = critical_point(&coeffs(k), &spec).unwrap();
            assert!(
                cp.lambda_star.iter().all(|&l| l > 0.1 && l < 10.0),
                "{:?}",
                cp.lambda_star
            );
        }
        let cp = critical_point(&coeffs(0), &spec).unwrap();
        assert!((cp.lambda_star[0] - 0.453).abs() < 1e-3);
    }
}
