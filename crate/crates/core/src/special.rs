//! Log-gamma, Beta function and sphere areas.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural logarithm of |Γ(x)| (Lanczos, g = 7), with reflection below 1/2.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x)Γ(1-x) = π / sin(πx)
        return (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Euler Beta function B(a, b) for positive arguments.
pub fn beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!(
            "Beta function needs positive arguments, got ({a}, {b})"
        )));
    }
    Ok((ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp())
}

/// Closed form `∫₀^∞ r^{2a-1} (1+r²)^{-a-b} dr = B(a,b)/2`.
///
/// This is the independent oracle against which the radial quadrature is validated.
pub fn beta_oracle(a: f64, b: f64) -> Result<f64> {
    Ok(0.5 * beta(a, b)?)
}

/// Surface area of the unit sphere S^{m} ⊂ R^{m+1}, i.e. ω_m = 2π^{(m+1)/2} / Γ((m+1)/2).
pub fn sphere_area(m: usize) -> f64 {
    let n = (m + 1) as f64;
    2.0 * (0.5 * n * PI.ln() - ln_gamma(0.5 * n)).exp()
}

/// Volume of the unit ball in R^n.
pub fn ball_volume(n: usize) -> f64 {
    sphere_area(n - 1) / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn gamma_known_values() {
        assert!(close(gamma(5.0), 24.0, 1e-13));
        assert!(close(gamma(0.5), PI.sqrt(), 1e-13));
        assert!(close(gamma(2.5), 1.329_340_388_179_137, 1e-13));
        assert!(close(gamma(3.5), 3.323_350_970_447_842_6, 1e-13));
        assert!(close(gamma(1.5), 0.886_226_925_452_758, 1e-13));
        assert!(close(ln_gamma(100.0), 359.134_205_369_575_4, 1e-13));
        assert!(close(gamma(0.25), 3.625_609_908_221_908, 1e-12));
    }

    #[test]
    fn beta_oracle_examples() {
        assert!(close(beta_oracle(1.0, 1.0).unwrap(), 0.5, 1e-14));
        assert!(close(
            beta_oracle(2.5, 2.5).unwrap(),
            0.036_815_538_909_255_39,
            1e-12
        ));
        assert!(close(
            beta_oracle(1.5, 3.5).unwrap(),
            0.061_359_231_515_425_65,
            1e-12
        ));
        assert!(beta_oracle(0.0, 1.0).is_err());
        assert!(beta_oracle(1.0, -2.0).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert!(close(sphere_area(1), 2.0 * PI, 1e-14));
        assert!(close(sphere_area(2), 4.0 * PI, 1e-14));
        // ω₆ = 16π³/15
        assert!(close(sphere_area(6), 16.0 * PI.powi(3) / 15.0, 1e-13));
        assert!(close(ball_volume(3), 4.0 * PI / 3.0, 1e-14));
    }
}
