//! Dirichlet projection on the unit ball.
//!
//! For a radial profile the harmonic extension of its (constant) boundary
//! trace is that constant, so P·u = u - u(1) exactly. Off-centre instantons are
//! projected to first order, PU ≈ U - C₀δ^{(N-2)/2} H(ξ,·).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{loglog_fit, LinearFit};
use crate::profiles::{
    c0, critical_exponent, eval_instanton, half_weight, hardy_exponents, HardyExponents,
};
use crate::profiles::{HardyInstanton, Instanton, RadialProfile};
use crate::quadrature::{radial_integral, QuadratureSpec, RadialDomain};

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Regular part H(x,y) = (|x|²|y|² - 2x·y + 1)^{(2-N)/2} of the Green function of the unit ball.
pub fn green_regular_part(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Domain("points must share a dimension N ≥ 3".into()));
    }
    if norm(x) > 1.0 || norm(y) > 1.0 {
        return Err(Error::Domain(
            "points must lie in the closed unit ball".into(),
        ));
    }
    let base = dot(x, x) * dot(y, y) - 2.0 * dot(x, y) + 1.0;
    Ok(base.powf(-half_weight(x.len())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectionOrder {
    /// The projection is exact (radial profiles).
    Exact,
    /// Truncated after the C₀δ^{(N-2)/2}H(ξ,·) term; the remainder is O(δ^{(N+2)/2}).
    FirstOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Base {
    Instanton { delta: f64, xi: Vec<f64> },
    Hardy(HardyInstanton),
}

/// A profile u together with its projection correction φ = u - Pu.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedBubble {
    pub base: Base,
    pub order: ProjectionOrder,
    /// Boundary constant for exact radial projections.
    constant: f64,
}

impl ProjectedBubble {
    pub fn base_value(&self, x: &[f64]) -> Result<f64> {
        match &self.base {
            Base::Instanton { delta, xi } => eval_instanton(*delta, xi, x),
            Base::Hardy(v) => {
                let r = norm(x);
                if r == 0.0 && v.exps.mu > 0.0 {
                    return Err(Error::Singularity { mu: v.exps.mu });
                }
                Ok(v.value(r))
            }
        }
    }

    pub fn phi(&self, x: &[f64]) -> Result<f64> {
        match (self.order, &self.base) {
            (ProjectionOrder::Exact, _) => Ok(self.constant),
            (ProjectionOrder::FirstOrder, Base::Instanton { delta, xi }) => {
                let n = x.len();
                Ok(c0(n) * delta.powf(half_weight(n)) * green_regular_part(xi, x)?)
            }
            (ProjectionOrder::FirstOrder, Base::Hardy(_)) => {
                unreachable!("Hardy profiles are radial")
            }
        }
    }

    /// Pu = u - φ.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.base_value(x)? - self.phi(x)?)
    }
}

/// Radial profile to project exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialBase {
    Instanton(Instanton),
    Hardy(HardyInstanton),
}

pub fn project_radial(base: RadialBase) -> ProjectedBubble {
    match base {
        RadialBase::Instanton(u) => ProjectedBubble {
            base: Base::Instanton {
                delta: u.delta,
                xi: vec![0.0; u.dim],
            },
            order: ProjectionOrder::Exact,
            constant: u.value(1.0),
        },
        RadialBase::Hardy(v) => ProjectedBubble {
            base: Base::Hardy(v),
            order: ProjectionOrder::Exact,
            constant: v.value(1.0),
        },
    }
}

pub fn project_offcenter(delta: f64, xi: &[f64], eta: f64) -> Result<ProjectedBubble> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if norm(xi) > 1.0 - eta {
        return Err(Error::Precondition(format!(
            "|xi| = {} exceeds 1 - eta = {}",
            norm(xi),
            1.0 - eta
        )));
    }
    Ok(ProjectedBubble {
        base: Base::Instanton {
            delta,
            xi: xi.to_vec(),
        },
        order: ProjectionOrder::FirstOrder,
        constant: 0.0,
    })
}

/// 1 - (1+t)^{-m}, without cancellation for small t.
fn one_minus_power(t: f64, m: f64) -> f64 {
    -(-m * t.ln_1p()).exp_m1()
}

/// |φ_σ - C_μσ^{(N-2)/2}|, the gap between the exact constant and its leading term.
pub fn radial_phi_remainder(exps: &HardyExponents, sigma: f64) -> f64 {
    let m = half_weight(exps.dim);
    exps.c_mu * sigma.powf(m) * one_minus_power(sigma * sigma, m)
}

/// |C₀δ^{(N-2)/2}H(0,0) - U_{δ,0}(1)|: the first-order off-centre correction at ξ = 0
/// against the exact radial constant.
pub fn centred_projection_gap(dim: usize, delta: f64) -> f64 {
    let m = half_weight(dim);
    c0(dim) * delta.powf(m) * one_minus_power(delta * delta, m)
}

/// Deterministic, roughly uniform unit vectors (normalised golden-ratio sequence).
pub fn sphere_samples(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let alphas: Vec<f64> = (0..dim).map(|j| ((j + 2) as f64).sqrt().fract()).collect();
    for i in 0..count {
        let v: Vec<f64> = alphas
            .iter()
            .map(|a| 2.0 * ((i as f64 + 0.5) * a).fract() - 1.0)
            .collect();
        let n = norm(&v);
        out.push(v.iter().map(|c| c / n).collect());
    }
    out
}

/// max over boundary samples of |PU_{δ,ξ}| for the first-order projection.
pub fn offcenter_boundary_defect(delta: f64, xi: &[f64], samples: usize) -> Result<f64> {
    let dim = xi.len();
    let m = half_weight(dim);
    // on |x| = 1, H(ξ,x) = |x-ξ|^{2-N}, so PU = C₀δ^m d^{-2m}((1+δ²/d²)^{-m} - 1)
    let mut worst: f64 = 0.0;
    for x in sphere_samples(dim, samples) {
        let d2: f64 = x.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum();
        let v = c0(dim) * delta.powf(m) * d2.powf(-m) * one_minus_power(delta * delta / d2, m);
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Which derivative field to project.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectedField {
    /// Ψ̄ = ∂V_σ/∂σ.
    Sigma,
    /// Ψ⁰ = ∂U_{δ,0}/∂δ.
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub scales: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: LinearFit,
}

/// ‖PΨ - Ψ‖_{L^{2*}(B)} for radial Ψ; PΨ - Ψ is the constant -Ψ(1).
pub fn projection_error_norm(
    dim: usize,
    mu: f64,
    scale: f64,
    field: ProjectedField,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let p = critical_exponent(dim);
    let boundary = match field {
        ProjectedField::Sigma => {
            HardyInstanton::new(scale, hardy_exponents(dim, mu)?).scale_deriv(1.0)
        }
        ProjectedField::Delta => Instanton::new(dim, scale).scale_deriv(1.0),
    };
    let defect = |_r: f64| boundary.abs().powf(p);
    Ok(radial_integral(dim, defect, 0.0, spec, RadialDomain::Ball(1.0))?.powf(1.0 / p))
}

pub fn projection_error_norms(
    dim: usize,
    mu: f64,
    scales: &[f64],
    field: ProjectedField,
    spec: &QuadratureSpec,
) -> Result<RateReport> {
    let values = scales
        .iter()
        .map(|&s| projection_error_norm(dim, mu, s, field, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport {
        scales: scales.to_vec(),
        fit: loglog_fit(scales, &values)?,
        values,
    })
}

/// ∫_B|∇PU_{δ,0}|² - [S₀^{N/2} - C₀^{2*}δ^{N-2}∫(1+|z|²)^{-(N+2)/2}], computed
/// from tails over |x| > 1 so that no leading terms cancel.
pub fn single_bubble_energy_remainder(
    dim: usize,
    delta: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let n = dim as f64;
    let m = half_weight(dim);
    let p = critical_exponent(dim);
    let u = Instanton::new(dim, delta);
    let c = u.value(1.0);
    let outside = spec.with_breaks(&[delta]);
    let tail = |power: f64| -> Result<f64> {
        let whole = radial_integral(
            dim,
            |r| {
                if r > 1.0 {
                    (power * u.ln_value(r)).exp()
                } else {
                    0.0
                }
            },
            0.0,
            &outside.with_breaks(&[1.0]),
            RadialDomain::Whole,
        )?;
        Ok(whole)
    };
    let m_p = radial_integral(
        dim,
        |r| (1.0 + r * r).powf(-(n + 2.0) / 2.0),
        0.0,
        spec,
        RadialDomain::Whole,
    )?;
    let gap = c0(dim) * delta.powf(m) * one_minus_power(delta * delta, m);
    Ok(-tail(p)? + c * tail(p - 1.0)? + c0(dim).powf(p - 1.0) * delta.powf(m) * m_p * gap)
}

/// ∫_B|PV_σ|^{2*} - [S_μ^{N/2} - 2*C₀C_μ^{2*-1}σ^{N-2}∫(|z|^{β₁}+|z|^{β₂})^{-(N+2)/2}].
pub fn single_hardy_mass_remainder(
    dim: usize,
    sigma: f64,
    mu: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let n = dim as f64;
    let p = critical_exponent(dim);
    let exps = hardy_exponents(dim, mu)?;
    let v = HardyInstanton::new(sigma, exps);
    let c = v.value(1.0);
    let spec = spec.with_breaks(&[sigma, 1.0]);
    let tail = radial_integral(
        dim,
        |r| {
            if r > 1.0 {
                (p * v.ln_value(r)).exp()
            } else {
                0.0
            }
        },
        0.0,
        &spec,
        RadialDomain::Whole,
    )?;
    // (V-c)^{2*} - V^{2*} = V^{2*}·expm1(2*·ln(1 - c/V)) on the ball, where V ≥ c
    let inside = radial_integral(
        dim,
        |r| {
            let lv = v.ln_value(r);
            let ratio = (c.ln() - lv).exp();
            (p * lv).exp() * (p * (-ratio).ln_1p()).exp_m1()
        },
        0.0,
        &spec,
        RadialDomain::Ball(1.0),
    )?;
    let k_mu = radial_integral(
        dim,
        |r| (r.powf(exps.beta1) + r.powf(exps.beta2)).powf(-(n + 2.0) / 2.0),
        0.0,
        &spec,
        RadialDomain::Whole,
    )?;
    let predicted = p * c0(dim) * exps.c_mu.powf(p - 1.0) * sigma.powf(n - 2.0) * k_mu;
    Ok(-tail + inside + predicted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_point(rng: &mut impl Rng, dim: usize, radius: f64) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = norm(&v);
            if n > 1e-3 && n <= 1.0 {
                return v
                    .iter()
                    .map(|c| c * radius * rng.gen::<f64>().powf(1.0 / 7.0) / n)
                    .collect();
            }
        }
    }

    #[test]
    fn regular_part_examples() {
        let z = vec![0.0; 7];
        assert_eq!(green_regular_part(&z, &z).unwrap(), 1.0);
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let x = random_point(&mut rng, 7, 0.99);
            let y = random_point(&mut rng, 7, 0.99);
            let (a, b) = (
                green_regular_part(&x, &y).unwrap(),
                green_regular_part(&y, &x).unwrap(),
            );
            assert!((a - b).abs() <= 1e-12 * a);
            assert!(a > 0.0);
            assert!((green_regular_part(&z, &x).unwrap() - 1.0).abs() < 1e-15);
        }
        // Dirichlet data: H = |x-y|^{2-N} on the sphere; one step inside, the
        // gap is first order in the distance to the sphere
        for _ in 0..20 {
            let dir = random_point(&mut rng, 7, 1.0);
            let y = random_point(&mut rng, 7, 0.9);
            for (radius, tol) in [(1.0, 1e-10), (1.0 - 1e-8, 1e-6)] {
                let x: Vec<f64> = dir.iter().map(|c| c / norm(&dir) * radius).collect();
                let d: f64 = x
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let g = d.powf(-5.0);
                assert!((green_regular_part(&x, &y).unwrap() - g).abs() <= tol * g);
            }
        }
        assert!(green_regular_part(&[1.1, 0.0, 0.0], &[0.0; 3]).is_err());
    }

    #[test]
    fn radial_projection_examples() {
        let exps = hardy_exponents(7, 0.3).unwrap();
        let v = HardyInstanton::new(0.05, exps);
        let pv = project_radial(RadialBase::Hardy(v));
        let mut e1 = vec![0.0; 7];
        e1[0] = 1.0;
        assert_eq!(pv.value(&e1).unwrap(), 0.0);
        assert!(
            (pv.phi(&e1).unwrap() - exps.c_mu * (0.05f64 / (1.0 + 0.0025)).powf(2.5)).abs() < 1e-14
        );
        let u = Instanton::new(7, 0.2);
        let pu = project_radial(RadialBase::Instanton(u));
        let centre = pu.value(&[0.0; 7]).unwrap();
        let expect = c0(7) * 0.2f64.powf(-2.5) - c0(7) * (0.2f64 / 1.04).powf(2.5);
        assert!((centre - expect).abs() < 1e-12 * expect);
        // squeeze 0 ≤ φ ≤ V on a radial sweep
        for i in 1..=100 {
            let mut x = vec![0.0; 7];
            x[0] = i as f64 / 100.0;
            let phi = pv.phi(&x).unwrap();
            assert!(phi >= 0.0 && phi <= pv.base_value(&x).unwrap());
        }
    }

    #[test]
    fn radial_phi_rate() {
        let exps = hardy_exponents(7, 0.5).unwrap();
        let s = [1e-2, 1e-3, 1e-4];
        let r: Vec<f64> = s.iter().map(|&x| radial_phi_remainder(&exps, x)).collect();
        assert!((loglog_fit(&s, &r).unwrap().slope - 4.5).abs() < 0.01);
    }

    #[test]
    fn offcenter_examples() {
        let xi = [0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let pu = project_offcenter(1e-3, &xi, 0.1).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..50 {
            let x = random_point(&mut rng, 7, 0.99);
            assert!(pu.phi(&x).unwrap() >= 0.0);
        }
        assert!(matches!(
            project_offcenter(1e-3, &[0.95, 0.0, 0.0], 0.1),
            Err(Error::Precondition(_))
        ));
        let deltas = [1e-1, 1e-2, 1e-3];
        let defects: Vec<f64> = deltas
            .iter()
            .map(|&d| offcenter_boundary_defect(d, &xi, 64).unwrap())
            .collect();
        assert!((loglog_fit(&deltas, &defects).unwrap().slope - 4.5).abs() < 0.05);
        let gaps: Vec<f64> = deltas
            .iter()
            .map(|&d| centred_projection_gap(7, d))
            .collect();
        assert!((loglog_fit(&deltas, &gaps).unwrap().slope - 4.5).abs() < 0.05);
    }

    #[test]
    fn projection_rates() {
        let spec = QuadratureSpec::default();
        let grid = [1e-2, 1e-3, 1e-4];
        let mut slopes = vec![];
        for mu in [0.0, 0.1, 1.0] {
            let rep = projection_error_norms(7, mu, &grid, ProjectedField::Sigma, &spec).unwrap();
            assert!(rep.values.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
            assert!((rep.fit.slope - 1.5).abs() < 0.15);
            slopes.push(rep.fit.slope);
        }
        assert!(slopes.iter().all(|s| (s - slopes[0]).abs() < 0.1));
        let rep = projection_error_norms(7, 0.0, &grid, ProjectedField::Delta, &spec).unwrap();
        assert!((rep.fit.slope - 1.5).abs() < 0.15);
    }

    #[test]
    fn single_bubble_expansions() {
        let spec = QuadratureSpec::default().with_rel_tol(1e-13);
        let deltas = [1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5)];
        let r: Vec<f64> = deltas
            .iter()
            .map(|&d| single_bubble_energy_remainder(7, d, &spec).unwrap().abs())
            .collect();
        assert!(loglog_fit(&deltas, &r).unwrap().slope > 5.0);
        let r: Vec<f64> = deltas
            .iter()
            .map(|&s| {
                single_hardy_mass_remainder(7, s, s * s, &spec)
                    .unwrap()
                    .abs()
            })
            .collect();
        assert!(loglog_fit(&deltas, &r).unwrap().slope > 5.0, "{r:?}");
    }
}
