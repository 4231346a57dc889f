//! Radial and radial-angular quadrature for moments over R^N and the unit ball.
//!
//! Radial integrals are computed in the variable u = ln r, where algebraic
//! behaviour r^a at the origin or at infinity becomes exponential decay. The
//! finite core is split at every supplied breakpoint; both tails are mapped
//! onto [0, 1) with u = u₀ ± t/(1-t).

pub mod adaptive;
pub mod gauss;
mod moments;

pub use moments::{
    closed_form_moments, log_moments, moment_h1, moment_h2, sobolev_constants, taylor_residuals,
    zeta_moment, ClosedForms, MomentTable, SobolevConstants, TaylorReport, ZetaDerivatives,
    ZetaKernel,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::sphere_area;
use adaptive::{integrate, Outcome, Tolerance};

pub const DEFAULT_ORDER: usize = 30;
/// Widest core panel in ln r before adaptivity starts.
const MAX_PANEL_WIDTH: f64 = 2.0;
/// Padding in ln r between the smallest/largest breakpoint and the mapped tails.
const TAIL_PADDING: f64 = 6.0;
const TAIL_BREAKS: [f64; 6] = [0.0, 0.5, 0.75, 0.9, 0.97, 1.0];
/// Beyond |ln r| = 300 every integrand in scope is below the double range
/// once squared; the mapped tails are truncated there.
pub(crate) const LOG_RADIUS_LIMIT: f64 = 300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Mandatory radial breakpoints (strictly increasing, positive).
    pub annuli: Vec<f64>,
    /// Gauss order of the polar-angle panels.
    pub angular_order: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 4000,
            annuli: Vec::new(),
            angular_order: 40,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol >= 1e-13 && self.rel_tol < 1.0) {
            return Err(Error::Domain(format!(
                "rel_tol must lie in [1e-13, 1), got {}",
                self.rel_tol
            )));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::Domain(format!(
                "abs_tol must be positive, got {}",
                self.abs_tol
            )));
        }
        if self.max_subdivisions == 0 || self.angular_order < 2 {
            return Err(Error::Domain(
                "subdivision budget and angular order must be positive".into(),
            ));
        }
        if self.annuli.iter().any(|&r| !(r > 0.0 && r.is_finite()))
            || self.annuli.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Domain(
                "breakpoints must be positive and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn with_rel_tol(&self, rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..self.clone()
        }
    }

    /// Copy of the quadrature settings with extra breakpoints merged in.
    pub fn with_breaks(&self, extra: &[f64]) -> Self {
        let mut annuli: Vec<f64> = self
            .annuli
            .iter()
            .chain(extra)
            .copied()
            .filter(|r| *r > 0.0 && r.is_finite())
            .collect();
        annuli.sort_by(f64::total_cmp);
        annuli.dedup();
        Self {
            annuli,
            ..self.clone()
        }
    }

    pub(crate) fn tolerance(&self, order: usize) -> Tolerance {
        Tolerance {
            rel: self.rel_tol,
            abs: self.abs_tol,
            max_subdivisions: self.max_subdivisions,
            order,
        }
    }
}

/// Breakpoints of the annuli A_i = B(0,√(δ_iδ_{i-1})) \ B(0,√(δ_iδ_{i+1})),
/// with δ₀ = ρ²/δ₁ and δ_{k+1} = σ, together with the scales themselves.
pub fn annuli_breakpoints(rho: f64, delta: &[f64], sigma: f64) -> Vec<f64> {
    let mut scales = vec![];
    if let Some(&d1) = delta.first() {
        scales.push(rho * rho / d1);
    }
    scales.extend_from_slice(delta);
    scales.push(sigma);
    let mut out: Vec<f64> = scales.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
    out.extend_from_slice(delta);
    out.push(sigma);
    out.retain(|r| *r > 0.0 && r.is_finite());
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RadialDomain {
    /// The ball B(0, R).
    Ball(f64),
    /// All of R^N.
    Whole,
}

/// Integrate g(u) over ln r ∈ (-∞, u_max] (or all of R) with mapped tails.
pub(crate) fn log_radial<G: Fn(f64) -> f64>(
    g: &G,
    breaks_r: &[f64],
    upper: Option<f64>,
    tol: Tolerance,
) -> Result<Outcome> {
    let mut us: Vec<f64> = breaks_r
        .iter()
        .filter(|r| **r > 0.0 && r.is_finite())
        .map(|r| r.ln())
        .filter(|u| upper.is_none_or(|b| *u < b))
        .collect();
    us.push(upper.unwrap_or(0.0));
    us.sort_by(f64::total_cmp);
    us.dedup();
    let lo = us[0] - TAIL_PADDING;
    let hi = match upper {
        Some(b) => b,
        None => us[us.len() - 1] + TAIL_PADDING,
    };
    let mut core = vec![lo];
    for &u in us.iter().chain(std::iter::once(&hi)) {
        let last = *core.last().unwrap();
        if u <= last {
            continue;
        }
        let pieces = ((u - last) / MAX_PANEL_WIDTH).ceil().max(1.0) as usize;
        for j in 1..=pieces {
            core.push(last + (u - last) * j as f64 / pieces as f64);
        }
    }
    let core_tol = tol;
    let mut parts = vec![integrate(g, &core, core_tol)?];
    let clipped = |u: f64| {
        if u.abs() > LOG_RADIUS_LIMIT {
            0.0
        } else {
            g(u)
        }
    };
    let lower_tail = |t: f64| {
        let s = 1.0 - t;
        clipped(lo - t / s) / (s * s)
    };
    parts.push(integrate(&lower_tail, &TAIL_BREAKS, tol)?);
    if upper.is_none() {
        let upper_tail = |t: f64| {
            let s = 1.0 - t;
            clipped(hi + t / s) / (s * s)
        };
        parts.push(integrate(&upper_tail, &TAIL_BREAKS, tol)?);
    }
    let value = adaptive::pairwise_sum(&parts.iter().map(|p| p.value).collect::<Vec<_>>());
    Ok(Outcome {
        value,
        error: parts.iter().map(|p| p.error).sum(),
        abs_value: parts.iter().map(|p| p.abs_value).sum(),
        subdivisions: parts.iter().map(|p| p.subdivisions).sum(),
    })
}

/// e^{ln_w}·v without overflow of the weight when the product is representable.
#[inline]
pub(crate) fn scaled(ln_w: f64, v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    v.signum() * (ln_w + v.abs().ln()).exp()
}

/// ∫ r^{N-1+w} f(r) dr with the change of variables r = e^u.
pub(crate) fn radial_outcome<F: Fn(f64) -> f64>(
    dim: usize,
    f: &F,
    power_weight: f64,
    spec: &QuadratureSpec,
    domain: RadialDomain,
) -> Result<Outcome> {
    spec.validate()?;
    let expo = dim as f64 + power_weight;
    let g = |u: f64| {
        let r = u.exp();
        if r == 0.0 || !r.is_finite() {
            return 0.0;
        }
        scaled(expo * u, f(r))
    };
    let upper = match domain {
        RadialDomain::Ball(radius) => {
            if !(radius > 0.0) {
                return Err(Error::Domain(format!(
                    "ball radius must be positive, got {radius}"
                )));
            }
            Some(radius.ln())
        }
        RadialDomain::Whole => None,
    };
    log_radial(&g, &spec.annuli, upper, spec.tolerance(DEFAULT_ORDER))
}

/// ∫_D |y|^{w} f(|y|) dy = ω_{N-1} ∫ r^{N-1+w} f(r) dr over a ball or R^N.
pub fn radial_integral<F: Fn(f64) -> f64>(
    dim: usize,
    f: F,
    power_weight: f64,
    spec: &QuadratureSpec,
    domain: RadialDomain,
) -> Result<f64> {
    Ok(sphere_area(dim - 1) * radial_outcome(dim, &f, power_weight, spec, domain)?.value)
}
