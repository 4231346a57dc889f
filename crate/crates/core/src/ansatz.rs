//! The radial tower ansatz Σ(-1)^{i-1} PU_{δ_i,0} + (-1)^k PV_σ on the unit ball.

use crate::error::{Error, Result};
use crate::profiles::{
    critical_exponent, hardy_exponents, power_nonlinearity, tower_scalings, HardyInstanton,
    Instanton, ModelParams, RadialProfile, Scalings, TowerParams,
};
use crate::quadrature::annuli_breakpoints;

/// ρ of the annuli partition; δ₀ = ρ²/δ₁.
pub const ANNULI_RHO: f64 = 0.5;
/// Smallest ε the radial quadrature is trusted at; below it σ approaches the
/// resolution of the scale partition.
pub const MIN_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct RadialAnsatz {
    pub dim: usize,
    pub epsilon: f64,
    pub mu: f64,
    pub bubbles: Vec<Instanton>,
    /// Boundary constants U_{δ_i}(1).
    pub bubble_consts: Vec<f64>,
    pub hardy: HardyInstanton,
    /// V_σ(1).
    pub hardy_const: f64,
    pub scalings: Scalings,
    f0_power: f64,
}

impl RadialAnsatz {
    pub fn new(model: &ModelParams, params: &TowerParams) -> Result<Self> {
        if !params.is_radial() {
            return Err(Error::Precondition(
                "the radial ansatz needs all zeta_i = 0".into(),
            ));
        }
        if params.epsilon < MIN_EPSILON {
            return Err(Error::Domain(format!(
                "epsilon = {:e} is below the supported minimum {MIN_EPSILON:e}",
                params.epsilon
            )));
        }
        let k = params.k();
        if k != model.k {
            return Err(Error::Precondition(format!(
                "tower parameters carry k = {k} but the model has k = {}",
                model.k
            )));
        }
        let scalings = tower_scalings(params, model.dim, k, model.eta)?;
        let mu = model.mu(params.epsilon);
        let exps = hardy_exponents(model.dim, mu)?;
        let bubbles: Vec<Instanton> = scalings
            .delta
            .iter()
            .map(|&d| Instanton::new(model.dim, d))
            .collect();
        let hardy = HardyInstanton::new(scalings.sigma, exps);
        Ok(Self {
            dim: model.dim,
            epsilon: params.epsilon,
            mu,
            bubble_consts: bubbles.iter().map(|u| u.value(1.0)).collect(),
            hardy_const: hardy.value(1.0),
            bubbles,
            hardy,
            scalings,
            f0_power: critical_exponent(model.dim) - 2.0,
        })
    }

    pub fn k(&self) -> usize {
        self.bubbles.len()
    }

    /// Sign (-1)^{i-1} of bubble i (0-based here).
    pub fn bubble_sign(&self, i: usize) -> f64 {
        if i.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Sign (-1)^k of the Hardy bubble.
    pub fn hardy_sign(&self) -> f64 {
        self.bubble_sign(self.k())
    }

    pub fn projected_bubble(&self, i: usize, r: f64) -> f64 {
        self.bubbles[i].value(r) - self.bubble_consts[i]
    }

    pub fn projected_hardy(&self, r: f64) -> f64 {
        self.hardy.value(r) - self.hardy_const
    }

    /// Σ s_i PU_i(r), the bubble part without the Hardy level.
    pub fn bubble_part(&self, r: f64) -> f64 {
        (0..self.k())
            .map(|i| self.bubble_sign(i) * self.projected_bubble(i, r))
            .sum()
    }

    pub fn value(&self, r: f64) -> f64 {
        self.bubble_part(r) + self.hardy_sign() * self.projected_hardy(r)
    }

    /// f₀(s) = |s|^{2*-2}s.
    pub fn f0(&self, s: f64) -> f64 {
        power_nonlinearity(s, self.f0_power, false)
    }

    /// Σ s_i f₀(U_i) + s_V f₀(V_σ): the right-hand sides of the summands' own equations.
    pub fn split_source(&self, r: f64) -> f64 {
        let p = self.f0_power + 1.0;
        let bubbles: f64 = (0..self.k())
            .map(|i| self.bubble_sign(i) * (p * self.bubbles[i].ln_value(r)).exp())
            .sum();
        bubbles + self.hardy_sign() * (p * self.hardy.ln_value(r)).exp()
    }

    /// ΔV from the closed-form second derivatives of every summand.
    pub fn laplacian(&self, r: f64) -> f64 {
        let bubbles: f64 = (0..self.k())
            .map(|i| self.bubble_sign(i) * self.bubbles[i].laplacian(r))
            .sum();
        bubbles + self.hardy_sign() * self.hardy.laplacian(r)
    }

    /// Mandatory radial breakpoints: the annuli, every scale and the unit sphere.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = annuli_breakpoints(ANNULI_RHO, &self.scalings.delta, self.scalings.sigma);
        b.push(1.0);
        b.retain(|r| *r <= 1.0);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}
