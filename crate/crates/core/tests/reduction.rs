use hardy_tower::energy::{
    direct_energy, interaction_integrals, psi_with_moments, EnergyCoefficients, InteractionKind,
};
use hardy_tower::profiles::{ModelParams, TowerParams};
use hardy_tower::quadrature::{MomentTable, QuadratureSpec};
use hardy_tower::solver::{critical_point, newton_refine, ReducedPoint};
use hardy_tower::Error;

const EPS_GRID: [f64; 4] = [1e-2, 3e-3, 1e-3, 3e-4];

fn setup(k: usize) -> (ModelParams, EnergyCoefficients, MomentTable) {
    let spec = QuadratureSpec::default();
    let table = MomentTable::compute(7, 0.0, &spec).unwrap();
    let model = ModelParams::new(7, 1.0, k, 0.1).unwrap();
    let coeffs = EnergyCoefficients::compute(&model, &table).unwrap();
    (model, coeffs, table)
}

#[test]
fn expansion_remainder_decays_at_the_critical_point() {
    let spec = QuadratureSpec::default();
    for k in [0, 1] {
        let (model, coeffs, _) = setup(k);
        let cp = critical_point(&coeffs, &spec).unwrap();
        let zeros = vec![coeffs.h1_zero; k];
        let psi = psi_with_moments(&cp.lambda_star, &zeros, &vec![coeffs.h2_zero; k], &coeffs);
        let rem: Vec<f64> = EPS_GRID
            .iter()
            .map(|&eps| {
                let params = TowerParams::radial(cp.lambda_star.clone(), 7, eps).unwrap();
                let j = direct_energy(&model, &params, &spec).unwrap().energy;
                (j - coeffs.expansion(eps, psi)).abs() / eps
            })
            .collect();
        assert!(rem.windows(2).all(|w| w[1] < w[0]), "k={k}: {rem:?}");
    }
}

#[test]
fn single_level_energy_approaches_a1_from_above() {
    let spec = QuadratureSpec::default();
    let (model, coeffs, _) = setup(0);
    let mut last = f64::INFINITY;
    for eps in [1e-2, 1e-3, 1e-4] {
        let params = TowerParams::radial(vec![0.4535], 7, eps).unwrap();
        let j = direct_energy(&model, &params, &spec).unwrap().energy;
        assert!(j > coeffs.a1 && j < last);
        last = j;
    }
    assert!((last - coeffs.a1) / coeffs.a1 < 0.01);
}

#[test]
fn adjacent_interactions_match_predictions() {
    let spec = QuadratureSpec::default();
    let (model, _, table) = setup(1);
    let params = TowerParams::radial(vec![1.0, 1.0], 7, 3e-4).unwrap();
    for kind in [
        InteractionKind::GradientCross { i: 1, j: 2 },
        InteractionKind::HardySelf { i: 1 },
    ] {
        let r = interaction_integrals(kind, &model, &params, &table, &spec).unwrap();
        assert!((r.value / r.predicted - 1.0).abs() < 0.1, "{kind:?}: {r:?}");
    }
    let params = TowerParams::radial(vec![0.52, 0.107], 7, 3e-4).unwrap();
    let r =
        interaction_integrals(InteractionKind::TowerMass, &model, &params, &table, &spec).unwrap();
    assert!((r.value / r.predicted - 1.0).abs() < 1e-4, "{r:?}");
}

#[test]
fn non_adjacent_terms_are_little_o_of_eps() {
    let spec = QuadratureSpec::default();
    let (model, _, table) = setup(2);
    for kind in [
        InteractionKind::GradientCross { i: 1, j: 3 },
        InteractionKind::HardyCross { i: 1, j: 2 },
    ] {
        let scaled: Vec<f64> = EPS_GRID
            .iter()
            .map(|&eps| {
                let params = TowerParams::radial(vec![1.0; 3], 7, eps).unwrap();
                interaction_integrals(kind, &model, &params, &table, &spec)
                    .unwrap()
                    .remainder_over_eps()
                    .abs()
            })
            .collect();
        assert!(
            scaled.windows(2).all(|w| w[1] < w[0]),
            "{kind:?}: {scaled:?}"
        );
    }
}

#[test]
fn newton_recovers_ladder_from_perturbed_starts() {
    let spec = QuadratureSpec::default();
    for k in [1, 2] {
        let (_, coeffs, _) = setup(k);
        let exact = critical_point(&coeffs, &spec).unwrap();
        for (f, z) in [(1.2, 0.05), (0.8, -0.05)] {
            let start = ReducedPoint {
                s: exact.s_hat.iter().map(|s| f * s).collect(),
                zeta: (0..k)
                    .map(|i| {
                        let mut v = vec![0.0; 7];
                        v[i] = z;
                        v
                    })
                    .collect(),
            };
            let cp = newton_refine(&start, &coeffs, &spec).unwrap();
            for (a, b) in cp.s_hat.iter().zip(&exact.s_hat) {
                assert!(((a - b) / b).abs() < 1e-8);
            }
            assert!(cp.zeta_star.iter().flatten().all(|c| c.abs() < 1e-8));
            assert!(cp.hessian_certificate.min_singular_value > 1e-6 * coeffs.scale());
        }
    }
}

#[test]
fn rejects_epsilon_below_supported_range() {
    let spec = QuadratureSpec::default();
    let (model, _, _) = setup(0);
    let params = TowerParams::radial(vec![0.45], 7, 1e-5).unwrap();
    assert!(matches!(
        direct_energy(&model, &params, &spec),
        Err(Error::Domain(_))
    ));
}
