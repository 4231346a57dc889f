//! Closed-form bubble profiles, their derivative fields, the nonlinearity and
//! the ε-scaling map of the tower ansatz.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 7;
pub const DEFAULT_ETA: f64 = 0.1;

/// Critical Sobolev exponent 2* = 2N/(N-2).
pub fn critical_exponent(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * n / (n - 2.0)
}

/// Normalisation C₀ = (N(N-2))^{(N-2)/4} of the instanton.
pub fn c0(dim: usize) -> f64 {
    let n = dim as f64;
    (n * (n - 2.0)).powf((n - 2.0) / 4.0)
}

/// Hardy threshold μ̄ = (N-2)²/4.
pub fn mu_bar(dim: usize) -> f64 {
    let n = dim as f64;
    (n - 2.0) * (n - 2.0) / 4.0
}

/// Half the conformal weight, (N-2)/2.
pub(crate) fn half_weight(dim: usize) -> f64 {
    (dim as f64 - 2.0) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub mu0: f64,
    pub k: usize,
    pub eta: f64,
}

impl ModelParams {
    pub fn new(dim: usize, mu0: f64, k: usize, eta: f64) -> Result<Self> {
        if dim < 7 {
            return Err(Error::Domain(format!(
                "dimension N = {dim} is below 7; use ModelParams::with_low_dim_override to allow it"
            )));
        }
        Self::with_low_dim_override(dim, mu0, k, eta)
    }

    /// Same validation as [`ModelParams::new`] but accepts any N ≥ 3.
    pub fn with_low_dim_override(dim: usize, mu0: f64, k: usize, eta: f64) -> Result<Self> {
        if dim < 3 {
            return Err(Error::Domain(format!(
                "dimension N = {dim} must be at least 3"
            )));
        }
        if !(mu0 > 0.0 && mu0.is_finite()) {
            return Err(Error::Domain(format!("mu0 must be positive, got {mu0}")));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Domain(format!("eta must lie in (0,1), got {eta}")));
        }
        Ok(Self { dim, mu0, k, eta })
    }

    pub fn critical_exponent(&self) -> f64 {
        critical_exponent(self.dim)
    }

    pub fn c0(&self) -> f64 {
        c0(self.dim)
    }

    pub fn mu_bar(&self) -> f64 {
        mu_bar(self.dim)
    }

    /// Hardy coefficient μ = μ₀ε.
    pub fn mu(&self, epsilon: f64) -> f64 {
        self.mu0 * epsilon
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            mu0: 1.0,
            k: 1,
            eta: DEFAULT_ETA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyExponents {
    pub dim: usize,
    pub mu: f64,
    pub mu_bar: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub c_mu: f64,
}

pub fn hardy_exponents(dim: usize, mu: f64) -> Result<HardyExponents> {
    if dim < 3 {
        return Err(Error::Domain(format!(
            "dimension N = {dim} must be at least 3"
        )));
    }
    let mb = mu_bar(dim);
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::Domain(format!(
            "Hardy coefficient must be non-negative, got {mu}"
        )));
    }
    if mu >= mb {
        return Err(Error::SupercriticalHardy { mu, mu_bar: mb });
    }
    let n = dim as f64;
    let root_bar = mb.sqrt();
    let root = (mb - mu).sqrt();
    let c_mu = (4.0 * n * (mb - mu) / (n - 2.0)).powf((n - 2.0) / 4.0);
    Ok(HardyExponents {
        dim,
        mu,
        mu_bar: mb,
        beta1: (root_bar - root) / root_bar,
        beta2: (root_bar + root) / root_bar,
        c_mu,
    })
}

/// A radial profile with closed-form value and first two radial derivatives.
pub trait RadialProfile {
    fn value(&self, r: f64) -> f64;
    fn ln_value(&self, r: f64) -> f64;
    fn deriv(&self, r: f64) -> f64;
    fn second_deriv(&self, r: f64) -> f64;
    /// u'' + (N-1)u'/r, evaluated without numerical differentiation.
    fn laplacian(&self, r: f64) -> f64;
    /// Derivative with respect to the concentration parameter (δ or σ).
    fn scale_deriv(&self, r: f64) -> f64;
}

/// The instanton U_{δ,0}(r) = C₀ (δ/(δ²+r²))^{(N-2)/2}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instanton {
    pub dim: usize,
    pub delta: f64,
    m: f64,
    coef: f64,
}

impl Instanton {
    pub fn new(dim: usize, delta: f64) -> Self {
        let m = half_weight(dim);
        Self {
            dim,
            delta,
            m,
            coef: c0(dim) * delta.powf(m),
        }
    }

    fn base(&self, r: f64) -> f64 {
        self.delta * self.delta + r * r
    }
}

impl RadialProfile for Instanton {
    fn value(&self, r: f64) -> f64 {
        self.coef * self.base(r).powf(-self.m)
    }

    fn ln_value(&self, r: f64) -> f64 {
        // ln(δ² + r²) without overflow for huge r
        let (a, b) = (2.0 * self.delta.ln(), 2.0 * r.ln());
        let ln_base = a.max(b) + (-(a - b).abs()).exp().ln_1p();
        self.coef.ln() - self.m * ln_base
    }

    fn deriv(&self, r: f64) -> f64 {
        -2.0 * self.m * r * self.coef * self.base(r).powf(-self.m - 1.0)
    }

    fn second_deriv(&self, r: f64) -> f64 {
        let b = self.base(r);
        -2.0 * self.m
            * self.coef
            * (b.powf(-self.m - 1.0) - 2.0 * (self.m + 1.0) * r * r * b.powf(-self.m - 2.0))
    }

    fn laplacian(&self, r: f64) -> f64 {
        // U'' + (N-1)U'/r collapses to -N(N-2)C₀δ^{(N-2)/2}δ²(δ²+r²)^{-(N+2)/2}
        let n = self.dim as f64;
        -n * 2.0 * self.m * self.coef * self.delta * self.delta * self.base(r).powf(-self.m - 2.0)
    }

    fn scale_deriv(&self, r: f64) -> f64 {
        let d2 = self.delta * self.delta;
        self.m * self.value(r) / self.delta * (r * r - d2) / (d2 + r * r)
    }
}

/// The radial Hardy instanton V_σ(r) = C_μ (σ/(σ² r^{β₁} + r^{β₂}))^{(N-2)/2}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyInstanton {
    pub sigma: f64,
    pub exps: HardyExponents,
    m: f64,
    ln_coef: f64,
}

impl HardyInstanton {
    pub fn new(sigma: f64, exps: HardyExponents) -> Self {
        let m = half_weight(exps.dim);
        Self {
            sigma,
            exps,
            m,
            ln_coef: exps.c_mu.ln() + m * sigma.ln(),
        }
    }

    /// ln D and the weights w₁ = σ²r^{β₁}/D, w₂ = r^{β₂}/D, with D = σ²r^{β₁} + r^{β₂}.
    fn split(&self, r: f64) -> (f64, f64, f64) {
        let lr = r.ln();
        let a = 2.0 * self.sigma.ln() + self.exps.beta1 * lr;
        let b = self.exps.beta2 * lr;
        let hi = a.max(b);
        let ln_d = hi + (-(a - b).abs()).exp().ln_1p();
        let w2 = 1.0 / (1.0 + (a - b).exp());
        let w1 = 1.0 / (1.0 + (b - a).exp());
        (ln_d, w1, w2)
    }

    /// r·D'/D and r²·D''/D.
    fn log_derivs(&self, r: f64) -> (f64, f64) {
        let (_, w1, w2) = self.split(r);
        let (b1, b2) = (self.exps.beta1, self.exps.beta2);
        (
            b1 * w1 + b2 * w2,
            b1 * (b1 - 1.0) * w1 + b2 * (b2 - 1.0) * w2,
        )
    }
}

impl RadialProfile for HardyInstanton {
    fn value(&self, r: f64) -> f64 {
        if r == 0.0 {
            return if self.exps.mu > 0.0 {
                f64::INFINITY
            } else {
                self.exps.c_mu * self.sigma.powf(-self.m)
            };
        }
        self.ln_value(r).exp()
    }

    fn ln_value(&self, r: f64) -> f64 {
        if r == 0.0 {
            return self.value(0.0).ln();
        }
        let (ln_d, _, _) = self.split(r);
        self.ln_coef - self.m * ln_d
    }

    fn deriv(&self, r: f64) -> f64 {
        if r == 0.0 && self.exps.mu == 0.0 {
            return 0.0;
        }
        let (p, _) = self.log_derivs(r);
        -self.m * self.value(r) * p / r
    }

    fn second_deriv(&self, r: f64) -> f64 {
        if r == 0.0 && self.exps.mu == 0.0 {
            let n = self.exps.dim as f64;
            return self.laplacian(0.0) / n;
        }
        let (p, q) = self.log_derivs(r);
        self.value(r) / (r * r) * (self.m * (self.m + 1.0) * p * p - self.m * q)
    }

    fn laplacian(&self, r: f64) -> f64 {
        let n = self.exps.dim as f64;
        if r == 0.0 && self.exps.mu == 0.0 {
            // same as the instanton at δ = σ
            return Instanton::new(self.exps.dim, self.sigma).laplacian(0.0);
        }
        let (p, q) = self.log_derivs(r);
        self.value(r) / (r * r)
            * (self.m * (self.m + 1.0) * p * p - self.m * q - (n - 1.0) * self.m * p)
    }

    fn scale_deriv(&self, r: f64) -> f64 {
        if r == 0.0 && self.exps.mu == 0.0 {
            return -self.m * self.value(0.0) / self.sigma;
        }
        let (_, w1, _) = self.split(r);
        self.m * self.value(r) / self.sigma * (1.0 - 2.0 * w1)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// U_{δ,ξ}(x).
pub fn eval_instanton(delta: f64, xi: &[f64], x: &[f64]) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if xi.len() != x.len() {
        return Err(Error::Domain("point dimensions differ".into()));
    }
    let n = x.len();
    let m = half_weight(n);
    Ok(c0(n) * (delta / (delta * delta + dist_sq(x, xi))).powf(m))
}

/// V_σ(x); errors at x = 0 when μ > 0 since the profile diverges there.
pub fn eval_hardy_instanton(sigma: f64, exps: &HardyExponents, x: &[f64]) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if x.len() != exps.dim {
        return Err(Error::Domain("point dimension differs from N".into()));
    }
    let r = norm(x);
    if r == 0.0 && exps.mu > 0.0 {
        return Err(Error::Singularity { mu: exps.mu });
    }
    Ok(HardyInstanton::new(sigma, *exps).value(r))
}

/// f_ε(s) = |s|^{2*-2-ε} s, or its derivative (2*-1-ε)|s|^{2*-2-ε}.
pub fn nonlinearity(dim: usize, s: f64, epsilon: f64, derivative: bool) -> Result<f64> {
    let q = critical_exponent(dim) - 2.0 - epsilon;
    if !(q > 0.0) {
        return Err(Error::Domain(format!(
            "epsilon = {epsilon} leaves no superlinear exponent (2*-2-eps = {q})"
        )));
    }
    Ok(power_nonlinearity(s, q, derivative))
}

#[inline]
pub(crate) fn power_nonlinearity(s: f64, q: f64, derivative: bool) -> f64 {
    let a = s.abs();
    if a == 0.0 {
        return 0.0;
    }
    let p = a.powf(q);
    if derivative {
        (q + 1.0) * p
    } else {
        p * s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerParams {
    /// λ₁..λ_k followed by λ̄.
    pub lambda: Vec<f64>,
    pub zeta: Vec<Vec<f64>>,
    pub epsilon: f64,
}

impl TowerParams {
    pub fn new(lambda: Vec<f64>, zeta: Vec<Vec<f64>>, epsilon: f64) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::Domain("lambda needs k+1 entries".into()));
        }
        if zeta.len() + 1 != lambda.len() {
            return Err(Error::Domain(format!(
                "expected {} zeta points for {} lambda entries",
                lambda.len() - 1,
                lambda.len()
            )));
        }
        if lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Domain("lambda entries must be positive".into()));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self {
            lambda,
            zeta,
            epsilon,
        })
    }

    /// Radial tower (all ζ_i = 0) in dimension `dim`.
    pub fn radial(lambda: Vec<f64>, dim: usize, epsilon: f64) -> Result<Self> {
        let k = lambda.len().saturating_sub(1);
        Self::new(lambda, vec![vec![0.0; dim]; k], epsilon)
    }

    pub fn k(&self) -> usize {
        self.lambda.len() - 1
    }

    pub fn lambda_bar(&self) -> f64 {
        self.lambda[self.k()]
    }

    pub fn is_radial(&self) -> bool {
        self.zeta.iter().all(|z| z.iter().all(|&c| c == 0.0))
    }

    /// Membership in O_η: every λ in (η, 1/η) and every |ζ_i| ≤ 1/η.
    pub fn in_box(&self, eta: f64) -> bool {
        self.lambda.iter().all(|&l| l > eta && l < 1.0 / eta)
            && self.zeta.iter().all(|z| norm(z) <= 1.0 / eta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalings {
    pub sigma: f64,
    pub delta: Vec<f64>,
    pub xi: Vec<Vec<f64>>,
    /// ε below which σ < δ_k < … < δ₁ holds.
    pub ordering_threshold: f64,
    pub warnings: Vec<String>,
}

pub fn tower_scalings(params: &TowerParams, dim: usize, k: usize, eta: f64) -> Result<Scalings> {
    if params.k() != k {
        return Err(Error::Domain(format!(
            "tower height k = {k} does not match {} lambda entries",
            params.lambda.len()
        )));
    }
    let n = dim as f64;
    let eps = params.epsilon;
    let delta: Vec<f64> = (1..=k)
        .map(|i| params.lambda[i - 1] * eps.powf((2.0 * i as f64 - 1.0) / (n - 2.0)))
        .collect();
    let sigma = params.lambda_bar() * eps.powf((2.0 * (k + 1) as f64 - 1.0) / (n - 2.0));
    let xi: Vec<Vec<f64>> = delta
        .iter()
        .zip(&params.zeta)
        .map(|(d, z)| z.iter().map(|c| d * c).collect())
        .collect();
    // δ_{i+1}/δ_i = (λ_{i+1}/λ_i) ε^{2/(N-2)} < 1  iff  ε < (λ_i/λ_{i+1})^{(N-2)/2}
    let ordering_threshold = params
        .lambda
        .windows(2)
        .map(|w| (w[0] / w[1]).powf((n - 2.0) / 2.0))
        .fold(f64::INFINITY, f64::min);
    let mut warnings = Vec::new();
    let mut scales = delta.clone();
    scales.push(sigma);
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        warnings.push(format!(
            "concentration scales are not strictly ordered at epsilon = {eps:e} (threshold {ordering_threshold:e})"
        ));
    }
    if !params.in_box(eta) {
        warnings.push(format!(
            "parameters lie outside the box O_eta with eta = {eta}"
        ));
    }
    Ok(Scalings {
        sigma,
        delta,
        xi,
        ordering_threshold,
        warnings,
    })
}

/// Selector for the derivative fields of the ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Field {
    /// ∂U_{δ_i,ξ_i}/∂ξ_{i,j}, with 1 ≤ i ≤ k and 1 ≤ j ≤ N.
    Xi { i: usize, j: usize },
    /// ∂U_{δ_i,ξ_i}/∂δ_i.
    Delta { i: usize },
    /// ∂V_σ/∂σ.
    Sigma,
}

pub fn eval_derivative_fields(
    model: &ModelParams,
    params: &TowerParams,
    which: Field,
    x: &[f64],
) -> Result<f64> {
    let dim = model.dim;
    if x.len() != dim {
        return Err(Error::Domain("point dimension differs from N".into()));
    }
    let k = params.k();
    let sc = tower_scalings(params, dim, k, model.eta)?;
    let m = half_weight(dim);
    let check_i = |i: usize| {
        if i == 0 || i > k {
            Err(Error::Index(format!("bubble index {i} outside 1..={k}")))
        } else {
            Ok(())
        }
    };
    match which {
        Field::Xi { i, j } => {
            check_i(i)?;
            if j == 0 || j > dim {
                return Err(Error::Index(format!(
                    "coordinate index {j} outside 1..={dim}"
                )));
            }
            let (d, xi) = (sc.delta[i - 1], &sc.xi[i - 1]);
            let u = eval_instanton(d, xi, x)?;
            Ok(2.0 * m * u * (x[j - 1] - xi[j - 1]) / (d * d + dist_sq(x, xi)))
        }
        Field::Delta { i } => {
            check_i(i)?;
            let (d, xi) = (sc.delta[i - 1], &sc.xi[i - 1]);
            let u = eval_instanton(d, xi, x)?;
            let r2 = dist_sq(x, xi);
            Ok(m * u / d * (r2 - d * d) / (r2 + d * d))
        }
        Field::Sigma => {
            let exps = hardy_exponents(dim, model.mu(params.epsilon))?;
            let r = norm(x);
            if r == 0.0 && exps.mu > 0.0 {
                return Err(Error::Singularity { mu: exps.mu });
            }
            Ok(HardyInstanton::new(sc.sigma, exps).scale_deriv(r))
        }
    }
}
