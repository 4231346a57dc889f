//! Energy expansion of the tower ansatz: coefficients, the reduced functions
//! ψ and ψ̂, direct quadrature of J_ε, and the interaction integrals.

use serde::{Deserialize, Serialize};

use crate::ansatz::RadialAnsatz;
use crate::error::{Error, Result};
use crate::profiles::{
    c0, critical_exponent, half_weight, hardy_exponents, HardyInstanton, ModelParams,
};
use crate::profiles::{RadialProfile, TowerParams};
use crate::quadrature::{
    radial_integral, zeta_moment, MomentTable, QuadratureSpec, RadialDomain, ZetaKernel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCoefficients {
    pub dim: usize,
    pub k: usize,
    pub mu0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub s_bar: f64,
    /// h₁(0) and h₂(0), used whenever ζ = 0.
    pub h1_zero: f64,
    pub h2_zero: f64,
}

impl EnergyCoefficients {
    pub fn compute(params: &ModelParams, moments: &MomentTable) -> Result<Self> {
        if moments.dim != params.dim {
            return Err(Error::Precondition(format!(
                "moment table is for N = {} but the model has N = {}",
                moments.dim, params.dim
            )));
        }
        let n = params.dim as f64;
        let p = critical_exponent(params.dim);
        let k1 = (params.k + 1) as f64;
        let c = c0(params.dim);
        let s_crit = moments.s0.powf(n / 2.0);
        Ok(Self {
            dim: params.dim,
            k: params.k,
            mu0: params.mu0,
            a1: k1 / n * s_crit,
            a2: k1 / p * moments.u_logmass
                - k1 / (p * p) * s_crit
                - 0.5 * moments.s0.powf((n - 2.0) / 2.0) * moments.s_bar * params.mu0,
            a3: k1 * k1 / (2.0 * p) * moments.u_mass,
            b1: 0.5 * c * moments.u_pmass,
            b2: c.powf(p),
            b3: 0.5 * c * c * params.mu0,
            b4: moments.u_mass / p,
            s_bar: moments.s_bar,
            h1_zero: moments.h1_zero,
            h2_zero: moments.h2_zero,
        })
    }

    /// a₁ + a₂ε - a₃ε ln ε + ψε.
    pub fn expansion(&self, epsilon: f64, psi: f64) -> f64 {
        self.a1 + self.a2 * epsilon - self.a3 * epsilon * epsilon.ln() + psi * epsilon
    }

    /// |b₁| + |b₄|, the scale of the reduced gradient.
    pub fn scale(&self) -> f64 {
        self.b1.abs() + self.b4.abs()
    }
}

/// s₁ = λ₁^{(N-2)/2}, s_{i+1} = (λ_{i+1}/λ_i)^{(N-2)/2}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SVariables {
    pub s: Vec<f64>,
}

impl SVariables {
    pub fn from_lambda(lambda: &[f64], dim: usize) -> Result<Self> {
        if lambda.is_empty() || lambda.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Domain("lambda entries must be positive".into()));
        }
        let m = half_weight(dim);
        let mut s = vec![lambda[0].powf(m)];
        s.extend(lambda.windows(2).map(|w| (w[1] / w[0]).powf(m)));
        Ok(Self { s })
    }

    pub fn to_lambda(&self, dim: usize) -> Result<Vec<f64>> {
        lambda_from_s(&self.s, dim)
    }
}

/// λ₁ = s₁^{2/(N-2)}, λ_{i+1} = λ_i s_{i+1}^{2/(N-2)}.
pub fn lambda_from_s(s: &[f64], dim: usize) -> Result<Vec<f64>> {
    if s.is_empty() || s.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("s entries must be positive".into()));
    }
    let e = 1.0 / half_weight(dim);
    let mut out = Vec::with_capacity(s.len());
    let mut acc = 1.0;
    for v in s {
        acc *= v.powf(e);
        out.push(acc);
    }
    Ok(out)
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// h₁(ζ_i), h₂(ζ_i) for every ζ_i, using the stored values at ζ = 0.
pub fn zeta_moments(
    coeffs: &EnergyCoefficients,
    zeta: &[Vec<f64>],
    spec: &QuadratureSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut h1 = Vec::with_capacity(zeta.len());
    let mut h2 = Vec::with_capacity(zeta.len());
    for z in zeta {
        let rho = norm(z);
        if rho == 0.0 {
            h1.push(coeffs.h1_zero);
            h2.push(coeffs.h2_zero);
        } else {
            h1.push(zeta_moment(coeffs.dim, ZetaKernel::h1(coeffs.dim), rho, spec)?.value);
            h2.push(zeta_moment(coeffs.dim, ZetaKernel::h2(coeffs.dim), rho, spec)?.value);
        }
    }
    Ok((h1, h2))
}

fn check_k(coeffs: &EnergyCoefficients, len: usize, what: &str) -> Result<()> {
    if len != coeffs.k + 1 {
        return Err(Error::Domain(format!(
            "{what} needs k+1 = {} entries, got {len}",
            coeffs.k + 1
        )));
    }
    Ok(())
}

/// ψ(λ, ζ) = b₁λ₁^{N-2} + Σb₂(λ_{i+1}/λ_i)^{(N-2)/2}h₁(ζ_i) - Σb₃h₂(ζ_i) - b₄ ln(λ₁…λ_{k+1})^{(N-2)/2}.
pub fn psi(
    lambda: &[f64],
    zeta: &[Vec<f64>],
    coeffs: &EnergyCoefficients,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_k(coeffs, lambda.len(), "lambda")?;
    if lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Domain("lambda entries must be positive".into()));
    }
    let (h1, h2) = zeta_moments(coeffs, zeta, spec)?;
    Ok(psi_with_moments(lambda, &h1, &h2, coeffs))
}

pub fn psi_with_moments(
    lambda: &[f64],
    h1: &[f64],
    h2: &[f64],
    coeffs: &EnergyCoefficients,
) -> f64 {
    let n = coeffs.dim as f64;
    let m = half_weight(coeffs.dim);
    let mut v = coeffs.b1 * lambda[0].powf(n - 2.0);
    for i in 0..coeffs.k {
        v += coeffs.b2 * (lambda[i + 1] / lambda[i]).powf(m) * h1[i] - coeffs.b3 * h2[i];
    }
    v - coeffs.b4 * m * lambda.iter().map(|l| l.ln()).sum::<f64>()
}

/// ψ̂(s, ζ) = b₁s₁² + Σb₂s_{i+1}h₁(ζ_i) - Σb₃h₂(ζ_i) - b₄ ln(s₁^{k+1}s₂^k…s_{k+1}).
pub fn psi_hat(
    s: &SVariables,
    zeta: &[Vec<f64>],
    coeffs: &EnergyCoefficients,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_k(coeffs, s.s.len(), "s")?;
    if s.s.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("s entries must be positive".into()));
    }
    let (h1, h2) = zeta_moments(coeffs, zeta, spec)?;
    Ok(psi_hat_with_moments(&s.s, &h1, &h2, coeffs))
}

pub fn psi_hat_with_moments(s: &[f64], h1: &[f64], h2: &[f64], coeffs: &EnergyCoefficients) -> f64 {
    let k = coeffs.k;
    let mut v = coeffs.b1 * s[0] * s[0] - coeffs.b4 * (k + 1) as f64 * s[0].ln();
    for i in 1..=k {
        v += coeffs.b2 * s[i] * h1[i - 1]
            - coeffs.b3 * h2[i - 1]
            - coeffs.b4 * (k + 1 - i) as f64 * s[i].ln();
    }
    v
}

/// ∇_s ψ̂.
pub fn psi_hat_gradient_s(s: &[f64], h1: &[f64], coeffs: &EnergyCoefficients) -> Vec<f64> {
    let k = coeffs.k;
    let mut g = vec![2.0 * coeffs.b1 * s[0] - (k + 1) as f64 * coeffs.b4 / s[0]];
    for i in 1..=k {
        g.push(coeffs.b2 * h1[i - 1] - (k + 1 - i) as f64 * coeffs.b4 / s[i]);
    }
    g
}

fn tight(spec: &QuadratureSpec, ansatz: &RadialAnsatz) -> QuadratureSpec {
    spec.with_rel_tol(spec.rel_tol.min(1e-12))
        .with_breaks(&ansatz.breakpoints())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectEnergy {
    pub epsilon: f64,
    /// J_ε(V).
    pub energy: f64,
    /// ∫|∇V|² - μ∫V²/|x|².
    pub quadratic: f64,
    /// ∫|V|^{2*-ε}.
    pub mass: f64,
    pub warnings: Vec<String>,
}

/// J_ε on the radial ansatz, μ = μ₀ε. The quadratic part is integrated by parts
/// against each summand's own equation, so no numerical derivative appears.
pub fn direct_energy(
    model: &ModelParams,
    params: &TowerParams,
    spec: &QuadratureSpec,
) -> Result<DirectEnergy> {
    let ans = RadialAnsatz::new(model, params)?;
    let spec = tight(spec, &ans);
    let mu = ans.mu;
    let sv = ans.hardy_sign();
    // -ΔV = Σs_i f₀(U_i) + s_V(f₀(V_σ) + μV_σ/r²), and V = 0 on the sphere
    let quad_integrand = |r: f64| {
        let v = ans.value(r);
        let hardy_gap = sv * ans.hardy_const - ans.bubble_part(r);
        v * (ans.split_source(r) + mu * hardy_gap / (r * r))
    };
    let quadratic = radial_integral(ans.dim, quad_integrand, 0.0, &spec, RadialDomain::Ball(1.0))?;
    let q = critical_exponent(ans.dim) - ans.epsilon;
    let mass = radial_integral(
        ans.dim,
        |r| ans.value(r).abs().powf(q),
        0.0,
        &spec,
        RadialDomain::Ball(1.0),
    )?;
    Ok(DirectEnergy {
        epsilon: ans.epsilon,
        energy: 0.5 * quadratic - mass / q,
        quadratic,
        mass,
        warnings: ans.scalings.warnings.clone(),
    })
}

/// L^{2N/(N+2)}(B) norm of f₀(V) - Σ(-1)^{i-1}f₀(U_i) - (-1)^k f₀(V_σ).
pub fn splitting_error(
    model: &ModelParams,
    params: &TowerParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let ans = RadialAnsatz::new(model, params)?;
    let spec = tight(spec, &ans);
    let n = ans.dim as f64;
    let q = 2.0 * n / (n + 2.0);
    let integrand = |r: f64| (ans.f0(ans.value(r)) - ans.split_source(r)).abs().powf(q);
    Ok(radial_integral(ans.dim, integrand, 0.0, &spec, RadialDomain::Ball(1.0))?.powf(1.0 / q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InteractionKind {
    /// μ∫|PU_i|²/|x|².
    HardySelf { i: usize },
    /// μ∫PU_iPU_j/|x|², i ≠ j.
    HardyCross { i: usize, j: usize },
    /// ∫∇PU_i·∇PU_j for i < j ≤ k; j = k+1 stands for PV_σ with the Hardy form.
    GradientCross { i: usize, j: usize },
    /// ∫∇PV_σ·∇PU_i - μPV_σPU_i/|x|².
    VUCross { i: usize },
    /// ∫|V|^{2*}.
    TowerMass,
    /// ∫|V|^{2*} ln|V|.
    LogMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub epsilon: f64,
    pub value: f64,
    /// Leading term predicted by the asymptotic expansion (0 where the term is o(ε)).
    pub predicted: f64,
}

impl Interaction {
    /// (value - predicted)/ε.
    pub fn remainder_over_eps(&self) -> f64 {
        (self.value - self.predicted) / self.epsilon
    }
}

fn v_moments(dim: usize, mu: f64, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let p = critical_exponent(dim);
    let v = HardyInstanton::new(1.0, hardy_exponents(dim, mu)?);
    let spec = spec.with_breaks(&[1.0]);
    let mass = radial_integral(
        dim,
        |r| (p * v.ln_value(r)).exp(),
        0.0,
        &spec,
        RadialDomain::Whole,
    )?;
    let logmass = radial_integral(
        dim,
        |r| {
            let l = v.ln_value(r);
            (p * l).exp() * l
        },
        0.0,
        &spec,
        RadialDomain::Whole,
    )?;
    Ok((mass, logmass))
}

pub fn interaction_integrals(
    kind: InteractionKind,
    model: &ModelParams,
    params: &TowerParams,
    moments: &MomentTable,
    spec: &QuadratureSpec,
) -> Result<Interaction> {
    let ans = RadialAnsatz::new(model, params)?;
    let spec = tight(spec, &ans);
    let dim = ans.dim;
    let n = dim as f64;
    let m = half_weight(dim);
    let p = critical_exponent(dim);
    let k = ans.k();
    let eps = ans.epsilon;
    let mu = ans.mu;
    let c = c0(dim);
    let lam = &params.lambda;
    let ball = RadialDomain::Ball(1.0);
    let bubble = |i: usize| -> Result<usize> {
        if i == 0 || i > k {
            Err(Error::Index(format!("bubble index {i} outside 1..={k}")))
        } else {
            Ok(i - 1)
        }
    };
    let (value, predicted) = match kind {
        InteractionKind::HardySelf { i } => {
            let a = bubble(i)?;
            let v = radial_integral(
                dim,
                |r| ans.projected_bubble(a, r).powi(2),
                -2.0,
                &spec,
                ball,
            )?;
            (mu * v, mu * c * c * moments.h2_zero)
        }
        InteractionKind::HardyCross { i, j } => {
            let (a, b) = (bubble(i)?, bubble(j)?);
            if a == b {
                return Err(Error::Index("hardy-cross needs i ≠ j".into()));
            }
            let v = radial_integral(
                dim,
                |r| ans.projected_bubble(a, r) * ans.projected_bubble(b, r),
                -2.0,
                &spec,
                ball,
            )?;
            (mu * v, 0.0)
        }
        InteractionKind::GradientCross { i, j } if j == k + 1 => {
            return interaction_integrals(
                InteractionKind::VUCross { i },
                model,
                params,
                moments,
                &spec,
            )
            .map(|r| Interaction { kind, ..r });
        }
        InteractionKind::GradientCross { i, j } => {
            let (a, b) = (bubble(i)?, bubble(j)?);
            if a >= b {
                return Err(Error::Index("gradient-cross needs i < j".into()));
            }
            // -ΔPU_i = U_i^{2*-1} in the ball
            let u = ans.bubbles[a];
            let v = radial_integral(
                dim,
                |r| ((p - 1.0) * u.ln_value(r)).exp() * ans.projected_bubble(b, r),
                0.0,
                &spec,
                ball,
            )?;
            let pred = if b == a + 1 {
                c.powf(p) * (lam[b] / lam[a]).powf(m) * moments.m_p * eps
            } else {
                0.0
            };
            (v, pred)
        }
        InteractionKind::VUCross { i } => {
            let a = bubble(i)?;
            // -ΔPV_σ - μPV_σ/r² = V_σ^{2*-1} + μV_σ(1)/r²
            let v = radial_integral(
                dim,
                |r| {
                    let src =
                        ((p - 1.0) * ans.hardy.ln_value(r)).exp() + mu * ans.hardy_const / (r * r);
                    src * ans.projected_bubble(a, r)
                },
                0.0,
                &spec,
                ball,
            )?;
            let pred = if i == k {
                c.powf(p) * (lam[k] / lam[k - 1]).powf(m) * moments.m_p * eps
            } else {
                0.0
            };
            (v, pred)
        }
        InteractionKind::TowerMass => {
            let v = radial_integral(dim, |r| ans.value(r).abs().powf(p), 0.0, &spec, ball)?;
            let (v_mass, _) = v_moments(dim, mu, &spec)?;
            let pred = if k == 0 {
                let exps = ans.hardy.exps;
                let k_mu = radial_integral(
                    dim,
                    |r| (r.powf(exps.beta1) + r.powf(exps.beta2)).powf(-(n + 2.0) / 2.0),
                    0.0,
                    &spec.with_breaks(&[1.0]),
                    RadialDomain::Whole,
                )?;
                v_mass - p * c * exps.c_mu.powf(p - 1.0) * ans.scalings.sigma.powf(n - 2.0) * k_mu
            } else {
                let s_crit = moments.s0.powf(n / 2.0);
                let mut pr = k as f64 * s_crit + v_mass
                    - p * c.powf(p) * lam[0].powf(n - 2.0) * moments.m_p * eps;
                for a in 0..k {
                    pr -= p
                        * c.powf(p)
                        * (lam[a + 1] / lam[a]).powf(m)
                        * (moments.h1_zero + moments.m_p)
                        * eps;
                }
                pr
            };
            (v, pred)
        }
        InteractionKind::LogMass => {
            let v = radial_integral(
                dim,
                |r| {
                    let a = ans.value(r).abs();
                    if a == 0.0 {
                        0.0
                    } else {
                        a.powf(p) * a.ln()
                    }
                },
                0.0,
                &spec,
                ball,
            )?;
            let (v_mass, v_logmass) = v_moments(dim, mu, &spec)?;
            let ln_deltas: f64 = ans.scalings.delta.iter().map(|d| d.ln()).sum();
            let pred = -m * ans.scalings.sigma.ln() * v_mass - m * ln_deltas * moments.u_mass
                + v_logmass
                + k as f64 * moments.u_logmass;
            (v, pred)
        }
    };
    Ok(Interaction {
        kind,
        epsilon: eps,
        value,
        predicted,
    })
}
