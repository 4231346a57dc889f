use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::adaptive::{integrate, Tolerance};
use super::{log_radial, radial_integral, scaled, QuadratureSpec, RadialDomain, DEFAULT_ORDER};
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, LinearFit};
use crate::profiles::{
    c0, critical_exponent, hardy_exponents, HardyInstanton, Instanton, RadialProfile,
};
use crate::special::{beta_oracle, sphere_area};

/// Below this |ζ| the moment and its derivatives are taken from the second
/// order Taylor polynomial at ζ = 0 (error O(|ζ|⁴)).
const TAYLOR_RADIUS: f64 = 1e-6;
const ANGULAR_BREAKS: [f64; 4] = [0.0, PI / 4.0, PI / 2.0, PI];

/// Kernel of a ζ-moment h(ζ) = ∫ |w|^{-a} (1 + |w-ζ|²)^{-p} dw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaKernel {
    pub a: f64,
    pub p: f64,
}

impl ZetaKernel {
    /// h₁(ζ) = ∫ |y+ζ|^{2-N} (1+|y|²)^{-(N+2)/2} dy.
    pub fn h1(dim: usize) -> Self {
        let n = dim as f64;
        Self {
            a: n - 2.0,
            p: (n + 2.0) / 2.0,
        }
    }

    /// h₂(ζ) = ∫ |y+ζ|^{-2} (1+|y|²)^{-(N-2)} dy.
    pub fn h2(dim: usize) -> Self {
        Self {
            a: 2.0,
            p: dim as f64 - 2.0,
        }
    }

    /// ∫ |y|^{-4} (1+|y|²)^{-(N-2)} dy at ζ = 0, the curvature moment of h₂.
    pub fn curvature(dim: usize) -> Self {
        Self {
            a: 4.0,
            p: dim as f64 - 2.0,
        }
    }

    fn f(&self, t: f64) -> f64 {
        (1.0 + t).powf(-self.p)
    }

    fn f1(&self, t: f64) -> f64 {
        -self.p * (1.0 + t).powf(-self.p - 1.0)
    }

    fn f2(&self, t: f64) -> f64 {
        self.p * (self.p + 1.0) * (1.0 + t).powf(-self.p - 2.0)
    }
}

/// h(ρ), h'(ρ), h''(ρ) along a ray, ρ = |ζ|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaDerivatives {
    pub rho: f64,
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl ZetaDerivatives {
    pub fn gradient(&self, zeta: &[f64]) -> Vec<f64> {
        if self.rho == 0.0 {
            return vec![0.0; zeta.len()];
        }
        zeta.iter().map(|z| self.d1 * z / self.rho).collect()
    }

    /// ∇²h = h'' ζ̂ζ̂ᵀ + (h'/ρ)(I - ζ̂ζ̂ᵀ).
    pub fn hessian(&self, zeta: &[f64]) -> DMatrix<f64> {
        let n = zeta.len();
        if self.rho < TAYLOR_RADIUS {
            return DMatrix::identity(n, n) * self.d2;
        }
        let tangential = self.d1 / self.rho;
        let mut h = DMatrix::identity(n, n) * tangential;
        for i in 0..n {
            for j in 0..n {
                let e = zeta[i] * zeta[j] / (self.rho * self.rho);
                h[(i, j)] += (self.d2 - tangential) * e;
            }
        }
        h
    }
}

fn radial_value(dim: usize, kernel: ZetaKernel, spec: &QuadratureSpec) -> Result<f64> {
    radial_integral(
        dim,
        |r| kernel.f(r * r),
        -kernel.a,
        spec,
        RadialDomain::Whole,
    )
}

fn radial_curvature(dim: usize, kernel: ZetaKernel, spec: &QuadratureSpec) -> Result<f64> {
    let n = dim as f64;
    // averaging cos²θ over the sphere gives 1/N
    radial_integral(
        dim,
        |r| 4.0 * r * r * kernel.f2(r * r) / n + 2.0 * kernel.f1(r * r),
        -kernel.a,
        spec,
        RadialDomain::Whole,
    )
}

/// The ζ-moment and its first two derivatives in |ζ|, by radius / polar-angle quadrature.
pub fn zeta_moment(
    dim: usize,
    kernel: ZetaKernel,
    rho: f64,
    spec: &QuadratureSpec,
) -> Result<ZetaDerivatives> {
    spec.validate()?;
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!(
            "|zeta| must be finite and non-negative, got {rho}"
        )));
    }
    let value0 = radial_value(dim, kernel, spec)?;
    let curv0 = radial_curvature(dim, kernel, spec)?;
    if rho < TAYLOR_RADIUS {
        return Ok(ZetaDerivatives {
            rho,
            value: value0 + 0.5 * curv0 * rho * rho,
            d1: curv0 * rho,
            d2: curv0,
        });
    }
    let value = angular_moment(dim, kernel, rho, 0, spec)?;
    let d1 = angular_moment(dim, kernel, rho, 1, spec)?;
    let d2 = angular_moment(dim, kernel, rho, 2, spec)?;
    Ok(ZetaDerivatives { rho, value, d1, d2 })
}

/// ω_{N-2} ∫₀^∞ r^{N-1-a} ∫₀^π ∂_ρ^order F(r² - 2rρcosθ + ρ²) sin^{N-2}θ dθ dr.
fn angular_moment(
    dim: usize,
    kernel: ZetaKernel,
    rho: f64,
    order: u8,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let n = dim as f64;
    let inner_tol = Tolerance {
        rel: (spec.rel_tol * 1e-2).max(1e-14),
        abs: 1e-300,
        max_subdivisions: spec.max_subdivisions,
        order: spec.angular_order,
    };
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let inner = |r: f64| -> f64 {
        let integrand = |theta: f64| {
            let c = theta.cos();
            let t = (r * r - 2.0 * r * rho * c + rho * rho).max(0.0);
            let s = theta.sin().powf(n - 2.0);
            let dt = 2.0 * (rho - r * c);
            let v = match order {
                0 => kernel.f(t),
                1 => kernel.f1(t) * dt,
                _ => kernel.f2(t) * dt * dt + 2.0 * kernel.f1(t),
            };
            v * s
        };
        match integrate(&integrand, &ANGULAR_BREAKS, inner_tol) {
            Ok(o) => o.value,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let g = |u: f64| {
        let r = u.exp();
        if r == 0.0 || !r.is_finite() {
            return 0.0;
        }
        scaled((n - kernel.a) * u, inner(r))
    };
    let breaks = [(rho - 1.0).max(rho / 2.0), rho, 1.0, rho + 1.0];
    let outer = log_radial(&g, &breaks, None, spec.tolerance(DEFAULT_ORDER));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(sphere_area(dim - 2) * outer?.value)
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub fn moment_h1(dim: usize, zeta: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    Ok(zeta_moment(dim, ZetaKernel::h1(dim), norm(zeta), spec)?.value)
}

pub fn moment_h2(dim: usize, zeta: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    Ok(zeta_moment(dim, ZetaKernel::h2(dim), norm(zeta), spec)?.value)
}

fn u_power_mass(dim: usize, power: f64, spec: &QuadratureSpec) -> Result<f64> {
    let u = Instanton::new(dim, 1.0);
    radial_integral(
        dim,
        |r| (power * u.ln_value(r)).exp(),
        0.0,
        spec,
        RadialDomain::Whole,
    )
}

fn v_power_mass(dim: usize, mu: f64, power: f64, spec: &QuadratureSpec) -> Result<f64> {
    let v = HardyInstanton::new(1.0, hardy_exponents(dim, mu)?);
    radial_integral(
        dim,
        |r| (power * v.ln_value(r)).exp(),
        0.0,
        spec,
        RadialDomain::Whole,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevConstants {
    pub s0: f64,
    pub s_mu: f64,
    /// Estimate of S̄ in S_μ = S₀ - S̄μ + O(μ²).
    pub s_bar: f64,
}

/// Step of the S̄ difference quotient.
pub const S_BAR_STEP: f64 = 1e-4;

/// S₀ and S_μ from the critical masses, S̄ by a Richardson-extrapolated difference quotient.
///
/// The difference quotient divides by 1e-4, so its masses are computed at the
/// tightest admissible tolerance regardless of `spec`.
pub fn sobolev_constants(dim: usize, mu: f64, spec: &QuadratureSpec) -> Result<SobolevConstants> {
    hardy_exponents(dim, mu)?;
    let n = dim as f64;
    let p = critical_exponent(dim);
    let tight = spec.with_rel_tol(1e-13);
    let s = |m: f64| -> Result<f64> { Ok(v_power_mass(dim, m, p, &tight)?.powf(2.0 / n)) };
    let s0 = u_power_mass(dim, p, &tight)?.powf(2.0 / n);
    let s_mu = if mu == 0.0 { s0 } else { s(mu)? };
    let h = S_BAR_STEP;
    let d_h = (s0 - s(h)?) / h;
    let d_half = (s0 - s(h / 2.0)?) / (h / 2.0);
    Ok(SobolevConstants {
        s0,
        s_mu,
        s_bar: 2.0 * d_half - d_h,
    })
}

/// Beta-function closed forms of the moments in `MomentTable`, all of the
/// form ∫_{R^N}|y|^{-a}(1+|y|²)^{-p} = ω_{N-1}·½B((N-a)/2, p-(N-a)/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForms {
    pub m_p: f64,
    pub h1_zero: f64,
    pub h2_zero: f64,
    pub curvature: f64,
    pub u_mass: f64,
    pub u_pmass: f64,
}

pub fn closed_form_moments(dim: usize) -> Result<ClosedForms> {
    let n = dim as f64;
    let om = sphere_area(dim - 1);
    let p = critical_exponent(dim);
    let c = c0(dim);
    let moment =
        |a: f64, q: f64| -> Result<f64> { Ok(om * beta_oracle((n - a) / 2.0, q - (n - a) / 2.0)?) };
    let m_p = moment(0.0, (n + 2.0) / 2.0)?;
    Ok(ClosedForms {
        m_p,
        h1_zero: moment(n - 2.0, (n + 2.0) / 2.0)?,
        h2_zero: moment(2.0, n - 2.0)?,
        curvature: moment(4.0, n - 2.0)?,
        u_mass: c.powf(p) * moment(0.0, n)?,
        u_pmass: c.powf(p - 1.0) * m_p,
    })
}

/// Second-order remainders of the small-μ laws C_μ ≈ C₀(1 - μ/(N-2)) and
/// S_μ ≈ S₀ - S̄μ, with their log-log slopes in μ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    pub mus: Vec<f64>,
    pub c_mu_residuals: Vec<f64>,
    pub s_mu_residuals: Vec<f64>,
    pub c_mu_fit: LinearFit,
    pub s_mu_fit: LinearFit,
}

pub fn taylor_residuals(dim: usize, mus: &[f64], spec: &QuadratureSpec) -> Result<TaylorReport> {
    let n = dim as f64;
    let c = c0(dim);
    let base = sobolev_constants(dim, 0.0, spec)?;
    let mut c_res = Vec::with_capacity(mus.len());
    let mut s_res = Vec::with_capacity(mus.len());
    for &mu in mus {
        let exps = hardy_exponents(dim, mu)?;
        c_res.push((exps.c_mu - c + c * mu / (n - 2.0)).abs());
        let s_mu = sobolev_constants(dim, mu, spec)?.s_mu;
        s_res.push((s_mu - base.s0 + base.s_bar * mu).abs());
    }
    Ok(TaylorReport {
        c_mu_fit: loglog_fit(mus, &c_res)?,
        s_mu_fit: loglog_fit(mus, &s_res)?,
        mus: mus.to_vec(),
        c_mu_residuals: c_res,
        s_mu_residuals: s_res,
    })
}

/// (∫U₁,₀^{2*} ln U₁,₀, ∫V₁^{2*} ln V₁).
pub fn log_moments(dim: usize, mu: f64, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let p = critical_exponent(dim);
    let u = Instanton::new(dim, 1.0);
    let v = HardyInstanton::new(1.0, hardy_exponents(dim, mu)?);
    let lm = |prof: &dyn RadialProfile| {
        radial_integral(
            dim,
            |r| {
                let l = prof.ln_value(r);
                (p * l).exp() * l
            },
            0.0,
            spec,
            RadialDomain::Whole,
        )
    };
    Ok((lm(&u)?, lm(&v)?))
}

/// Radial moments consumed by the energy coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub dim: usize,
    pub mu: f64,
    /// ω_{N-1}.
    pub omega: f64,
    /// ∫(1+|y|²)^{-(N+2)/2}.
    pub m_p: f64,
    /// ∫U₁,₀^{2*}.
    pub u_mass: f64,
    /// ∫U₁,₀^{2*-1}.
    pub u_pmass: f64,
    pub u_logmass: f64,
    pub v_mass: f64,
    pub v_logmass: f64,
    pub s0: f64,
    pub s_mu: f64,
    pub s_bar: f64,
    /// h₁(0).
    pub h1_zero: f64,
    /// h₂(0).
    pub h2_zero: f64,
    /// ∫|y|^{-4}(1+|y|²)^{-(N-2)}.
    pub curvature: f64,
}

impl MomentTable {
    pub fn compute(dim: usize, mu: f64, spec: &QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let n = dim as f64;
        let p = critical_exponent(dim);
        let sob = sobolev_constants(dim, mu, spec)?;
        let (u_logmass, v_logmass) = log_moments(dim, mu, spec)?;
        let m_p = radial_integral(
            dim,
            |r| (1.0 + r * r).powf(-(n + 2.0) / 2.0),
            0.0,
            spec,
            RadialDomain::Whole,
        )?;
        Ok(Self {
            dim,
            mu,
            omega: sphere_area(dim - 1),
            m_p,
            u_mass: u_power_mass(dim, p, spec)?,
            u_pmass: u_power_mass(dim, p - 1.0, spec)?,
            u_logmass,
            v_mass: v_power_mass(dim, mu, p, spec)?,
            v_logmass,
            s0: sob.s0,
            s_mu: sob.s_mu,
            s_bar: sob.s_bar,
            h1_zero: zeta_moment(dim, ZetaKernel::h1(dim), 0.0, spec)?.value,
            h2_zero: zeta_moment(dim, ZetaKernel::h2(dim), 0.0, spec)?.value,
            curvature: zeta_moment(dim, ZetaKernel::curvature(dim), 0.0, spec)?.value,
        })
    }

    pub fn c0(&self) -> f64 {
        c0(self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn closed_h1(dim: usize, rho: f64) -> f64 {
        let n = dim as f64;
        sphere_area(dim - 1) / n * (1.0 + rho * rho).powf(-(n - 2.0) / 2.0)
    }

    #[test]
    fn zero_moments_match_beta_oracle() {
        let spec = QuadratureSpec::default();
        let om = sphere_area(6);
        let h1 = moment_h1(7, &[0.0; 7], &spec).unwrap();
        assert!(rel(h1, om / 7.0) < 1e-9);
        let h2 = moment_h2(7, &[0.0; 7], &spec).unwrap();
        assert!(rel(h2, om * beta_oracle(2.5, 2.5).unwrap()) < 1e-9);
        assert!((h2 - 1.21766).abs() < 1e-4);
    }

    #[test]
    fn h1_matches_closed_form_off_centre() {
        // h₁(ζ) = h₁(0)(1+|ζ|²)^{-(N-2)/2}: U solves -ΔU = U^{2*-1}, so h₁ is U itself up to scaling
        let spec = QuadratureSpec::default();
        for &rho in &[1e-3, 0.3, 1.0, 4.0] {
            let d = zeta_moment(7, ZetaKernel::h1(7), rho, &spec).unwrap();
            assert!(rel(d.value, closed_h1(7, rho)) < 1e-9, "rho = {rho}");
            let exact_d1 = -5.0 * rho / (1.0 + rho * rho) * closed_h1(7, rho);
            assert!(
                (d.d1 - exact_d1).abs() < 1e-8 * closed_h1(7, 0.0),
                "rho = {rho}"
            );
            let exact_d2 = closed_h1(7, rho) * (30.0 * rho * rho - 5.0) / (1.0 + rho * rho).powi(2);
            assert!(
                (d.d2 - exact_d2).abs() < 1e-8 * closed_h1(7, 0.0),
                "rho = {rho}"
            );
        }
    }

    #[test]
    fn curvature_of_h2_at_zero() {
        // Δ|y|^{-2} = -2(N-4)|y|^{-4}, so h₂''(0) = -2(N-4)/N · I₄
        let spec = QuadratureSpec::default();
        let d = zeta_moment(7, ZetaKernel::h2(7), 0.0, &spec).unwrap();
        let i4 = sphere_area(6) * beta_oracle(1.5, 3.5).unwrap();
        assert!(rel(d.d2, -6.0 / 7.0 * i4) < 1e-9);
        // the angular path agrees with the radial one just off the origin
        let near = zeta_moment(7, ZetaKernel::h2(7), 2e-3, &spec).unwrap();
        assert!(rel(near.d2, d.d2) < 1e-4);
        assert!(rel(near.d1 / near.rho, d.d2) < 1e-4);
    }

    #[test]
    fn derivatives_match_differences() {
        let spec = QuadratureSpec::default().with_rel_tol(1e-12);
        let k = ZetaKernel::h2(7);
        let rho = 0.7;
        let h = 1e-3;
        let f = |r: f64| zeta_moment(7, k, r, &spec).unwrap().value;
        let d = zeta_moment(7, k, rho, &spec).unwrap();
        let fd1 = (f(rho + h) - f(rho - h)) / (2.0 * h);
        let fd2 = (f(rho + h) - 2.0 * f(rho) + f(rho - h)) / (h * h);
        assert!(rel(d.d1, fd1) < 1e-6);
        assert!(rel(d.d2, fd2) < 1e-4);
    }

    #[test]
    fn sobolev_examples() {
        let spec = QuadratureSpec::default();
        let s = sobolev_constants(7, 0.1, &spec).unwrap();
        let n = 7.0;
        let oracle = c0(7).powf(2.8) * sphere_area(6) * beta_oracle(3.5, 3.5).unwrap();
        assert!(rel(s.s0.powf(3.5), oracle) < 1e-10);
        assert!((s.s0 - 23.653).abs() < 2e-3);
        assert!((s.s0.powf(3.5) - 6.435e4).abs() < 10.0);
        assert!(s.s_mu < s.s0);
        // S_μ = S₀(1-μ/μ̄)^{(N-1)/N} gives S̄ = S₀(N-1)/(Nμ̄)
        let s_bar = s.s0 * (n - 1.0) / (n * 6.25);
        assert!(rel(s.s_bar, s_bar) < 1e-6);
        assert!(rel(s.s_mu, s.s0 * (1.0f64 - 0.1 / 6.25).powf(6.0 / 7.0)) < 1e-11);
    }

    #[test]
    fn log_moment_limits() {
        let spec = QuadratureSpec::default();
        let (u, v) = log_moments(7, 1e-4, &spec).unwrap();
        assert!((u - v).abs() <= 1e-2 * u.abs());
        let (u8, _) = log_moments(7, 0.0, &spec.with_rel_tol(1e-8)).unwrap();
        assert!(rel(u8, u) < 1e-8);
    }

    #[test]
    fn closed_forms_match_table() {
        let t = MomentTable::compute(7, 0.0, &QuadratureSpec::default()).unwrap();
        let c = closed_form_moments(7).unwrap();
        for (a, b) in [
            (t.m_p, c.m_p),
            (t.h1_zero, c.h1_zero),
            (t.h2_zero, c.h2_zero),
            (t.curvature, c.curvature),
            (t.u_mass, c.u_mass),
            (t.u_pmass, c.u_pmass),
        ] {
            assert!(rel(a, b) < 1e-9, "{a} vs {b}");
        }
        assert!((c.h1_zero - 16.0 * PI.powi(3) / 105.0).abs() < 1e-12);
    }

    #[test]
    fn taylor_laws_are_quadratic() {
        let mus = crate::fit::log_grid(1e-4, 1e-2, 5).unwrap();
        let rep = taylor_residuals(7, &mus, &QuadratureSpec::default()).unwrap();
        assert!(
            (rep.c_mu_fit.slope - 2.0).abs() < 0.1,
            "{}",
            rep.c_mu_fit.slope
        );
        assert!(
            (rep.s_mu_fit.slope - 2.0).abs() < 0.1,
            "{}",
            rep.s_mu_fit.slope
        );
    }

    #[test]
    fn table_identities() {
        let spec = QuadratureSpec::default();
        let t = MomentTable::compute(7, 0.2, &spec).unwrap();
        assert!(rel(t.u_mass, t.s0.powf(3.5)) < 1e-9);
        assert!(rel(t.v_mass, t.s_mu.powf(3.5)) < 1e-9);
        assert!(rel(t.h1_zero, t.m_p) < 1e-9);
        // ∫U^{2*-1} = C₀^{2*-1} m_p
        assert!(rel(t.u_pmass, c0(7).powf(1.8) * t.m_p) < 1e-9);
    }
}
