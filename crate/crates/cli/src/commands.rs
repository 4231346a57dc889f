//! Dispatch of the report-producing commands.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::Result;
use rayon::prelude::*;

use hardy_tower::energy::{
    direct_energy, interaction_integrals, psi_with_moments, EnergyCoefficients, InteractionKind,
};
use hardy_tower::fit::log_grid;
use hardy_tower::profiles::{
    c0, critical_exponent, hardy_exponents, mu_bar, ModelParams, TowerParams,
};
use hardy_tower::quadrature::{closed_form_moments, taylor_residuals, MomentTable, QuadratureSpec};
use hardy_tower::solver::{critical_point, g_hessian_at_zero, g_ray, newton_refine, ReducedPoint};
use hardy_tower::tower::{
    build_tower, correction_exponent, decay_sweep, residual, sign_changes, spectrum_check,
    RadialGrid, DEFAULT_R_MIN, MIN_NODES_PER_DECADE,
};

use crate::config::{CommandName, RunConfig};
use crate::report::{field_csv, Provenance, Record, Report};

/// Extra files a command writes next to its report.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
}

#[derive(Default)]
struct Output {
    records: Vec<Record>,
    grids: BTreeMap<String, usize>,
    artifacts: Vec<Artifact>,
}

impl Output {
    fn push(&mut self, r: Record) {
        self.records.push(r);
    }
}

/// Runs one command. Numeric failures end up as a failing record, never as a panic.
pub fn run(config: &RunConfig) -> (Report, Vec<Artifact>) {
    let start = Instant::now();
    let result = match config.command {
        CommandName::Constants => constants(config),
        CommandName::Expansion => expansion(config),
        CommandName::CriticalPoint => critical(config),
        CommandName::Tower => tower(config),
        CommandName::ResidualSweep => residual_sweep(config),
        CommandName::Spectrum => spectrum(config),
        CommandName::Interactions => interactions(config),
    };
    let out = result.unwrap_or_else(|e| {
        log::error!("{} failed: {e:#}", config.command);
        Output {
            records: vec![Record::failure(format!("{e:#}"))],
            ..Output::default()
        }
    });
    let spec = config.spec().unwrap_or_default();
    let provenance = Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        rel_tol: spec.rel_tol,
        abs_tol: spec.abs_tol,
        max_subdivisions: spec.max_subdivisions,
        angular_order: spec.angular_order,
        grids: out.grids,
        wall_time_s: config.wall_time.then(|| start.elapsed().as_secs_f64()),
    };
    (
        Report::finish(
            config.command.as_str(),
            config.clone(),
            out.records,
            provenance,
        ),
        out.artifacts,
    )
}

fn quad(value: f64, spec: &QuadratureSpec) -> f64 {
    spec.rel_tol * value.abs()
}

fn eps_key(eps: f64) -> String {
    format!("eps={eps}")
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// The ε-grid ordered from large to small.
fn descending(grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(|a, b| b.total_cmp(a));
    g
}

struct Setup {
    model: ModelParams,
    spec: QuadratureSpec,
    table: MomentTable,
    coeffs: EnergyCoefficients,
}

fn setup(config: &RunConfig) -> Result<Setup> {
    let model = config.model()?;
    let spec = config.spec()?;
    let table = MomentTable::compute(model.dim, 0.0, &spec)?;
    let coeffs = EnergyCoefficients::compute(&model, &table)?;
    Ok(Setup {
        model,
        spec,
        table,
        coeffs,
    })
}

/// The configured λ, or the critical point λ* of the reduced energy.
fn lambda(config: &RunConfig, s: &Setup) -> Result<Vec<f64>> {
    match &config.lambda {
        Some(l) => Ok(l.clone()),
        None => Ok(critical_point(&s.coeffs, &s.spec)?.lambda_star),
    }
}

fn constants(config: &RunConfig) -> Result<Output> {
    let s = setup(config)?;
    let dim = s.model.dim;
    let spec = &s.spec;
    let mut out = Output::default();
    out.push(Record::new(
        "critical_exponent",
        "",
        critical_exponent(dim),
        0.0,
    ));
    out.push(Record::new("c0", "", c0(dim), 0.0));
    out.push(Record::new("mu_bar", "", mu_bar(dim), 0.0));
    let exps = hardy_exponents(dim, config.mu)?;
    let key = format!("mu={}", config.mu);
    out.push(Record::new("beta1", key.clone(), exps.beta1, 0.0));
    out.push(Record::new("beta2", key.clone(), exps.beta2, 0.0));
    out.push(
        Record::new(
            "beta1_plus_beta2",
            key.clone(),
            exps.beta1 + exps.beta2,
            0.0,
        )
        .within(2.0, 1e-14),
    );
    out.push(Record::new("c_mu", key.clone(), exps.c_mu, 0.0));

    let t = &s.table;
    let cf = closed_form_moments(dim)?;
    for (name, value, oracle) in [
        ("m_p", t.m_p, cf.m_p),
        ("h1_zero", t.h1_zero, cf.h1_zero),
        ("h2_zero", t.h2_zero, cf.h2_zero),
        ("curvature_moment", t.curvature, cf.curvature),
        ("u_mass", t.u_mass, cf.u_mass),
        ("u_pmass", t.u_pmass, cf.u_pmass),
    ] {
        out.push(Record::new(name, "mu=0", value, quad(value, spec)).within_rel(oracle, 1e-8));
    }
    out.push(Record::new(
        "u_logmass",
        "mu=0",
        t.u_logmass,
        quad(t.u_logmass, spec),
    ));
    out.push(
        Record::new("s0", "", t.s0, quad(t.s0, spec))
            .within_rel(t.u_mass.powf(2.0 / dim as f64), 1e-12),
    );
    let n = dim as f64;
    let s_bar_closed = t.s0 * (n - 1.0) / (n * mu_bar(dim));
    out.push(Record::new("s_bar", "", t.s_bar, 1e-7 * t.s_bar).within_rel(s_bar_closed, 1e-6));
    let at_mu = MomentTable::compute(dim, config.mu, spec)?;
    out.push(Record::new(
        "s_mu",
        key.clone(),
        at_mu.s_mu,
        quad(at_mu.s_mu, spec),
    ));
    out.push(Record::new(
        "v_mass",
        key.clone(),
        at_mu.v_mass,
        quad(at_mu.v_mass, spec),
    ));
    out.push(Record::new(
        "v_logmass",
        key,
        at_mu.v_logmass,
        quad(at_mu.v_logmass, spec),
    ));

    let c = &s.coeffs;
    let k = format!("k={}", c.k);
    for (name, v) in [
        ("a1", c.a1),
        ("a2", c.a2),
        ("a3", c.a3),
        ("b1", c.b1),
        ("b2", c.b2),
        ("b3", c.b3),
        ("b4", c.b4),
    ] {
        out.push(Record::new(name, k.clone(), v, quad(v, spec)));
    }
    out.push(
        Record::new("a3_over_a1", k, c.a3 / c.a1, quad(1.0, spec))
            .within_rel(n * (c.k + 1) as f64 / (2.0 * critical_exponent(dim)), 1e-9),
    );

    let mus = log_grid(1e-4, 1e-2, 5)?;
    let taylor = taylor_residuals(dim, &mus, spec)?;
    out.push(
        Record::new(
            "c_mu_taylor_slope",
            "mu in [1e-4, 1e-2]",
            taylor.c_mu_fit.slope,
            0.0,
        )
        .within(2.0, 0.1)
        .note(format!("r_squared={}", taylor.c_mu_fit.r_squared)),
    );
    out.push(
        Record::new(
            "s_mu_taylor_slope",
            "mu in [1e-4, 1e-2]",
            taylor.s_mu_fit.slope,
            0.0,
        )
        .within(2.0, 0.1)
        .note(format!("r_squared={}", taylor.s_mu_fit.r_squared)),
    );
    Ok(out)
}

fn expansion(config: &RunConfig) -> Result<Output> {
    let s = setup(config)?;
    let k = s.model.k;
    let lam = lambda(config, &s)?;
    let c = &s.coeffs;
    let psi = psi_with_moments(&lam, &vec![c.h1_zero; k], &vec![c.h2_zero; k], c);
    let grid = descending(&config.eps_grid);
    let energies = grid
        .par_iter()
        .map(|&eps| -> Result<_> {
            let params = TowerParams::radial(lam.clone(), s.model.dim, eps)?;
            Ok(direct_energy(&s.model, &params, &s.spec)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Output::default();
    out.push(Record::new("psi", "", psi, quad(psi, &s.spec)));
    let mut remainders = Vec::new();
    for (eps, e) in grid.iter().zip(&energies) {
        let expected = c.expansion(*eps, psi);
        let rem = (e.energy - expected).abs() / eps;
        remainders.push(rem);
        let warn = e.warnings.join("; ");
        out.push(
            Record::new(
                "direct_energy",
                eps_key(*eps),
                e.energy,
                quad(e.energy, &s.spec),
            )
            .note(warn),
        );
        out.push(Record::new(
            "expansion",
            eps_key(*eps),
            expected,
            quad(expected, &s.spec),
        ));
        out.push(Record::new(
            "remainder_over_eps",
            eps_key(*eps),
            rem,
            quad(e.energy, &s.spec) / eps,
        ));
    }
    let decreasing = strictly_decreasing(&remainders);
    out.push(
        Record::new("remainder_decreasing", "", decreasing as u8 as f64, 0.0).flag(decreasing),
    );
    for (i, l) in lam.iter().enumerate() {
        out.push(Record::new("lambda", format!("i={}", i + 1), *l, 0.0));
    }
    Ok(out)
}

fn critical(config: &RunConfig) -> Result<Output> {
    let s = setup(config)?;
    let c = &s.coeffs;
    let k = c.k;
    let dim = c.dim;
    let mut out = Output::default();
    let cp = critical_point(c, &s.spec)?;
    let scale = c.scale();
    for (i, v) in cp.s_hat.iter().enumerate() {
        out.push(Record::new(
            "s_hat",
            format!("i={}", i + 1),
            *v,
            quad(*v, &s.spec),
        ));
    }
    for i in 1..k {
        let ratio = cp.s_hat[i] / cp.s_hat[i + 1];
        let expect = (k + 1 - i) as f64 / (k - i) as f64;
        out.push(
            Record::new("s_hat_ratio", format!("i={},{}", i + 1, i + 2), ratio, 0.0)
                .within_rel(expect, 1e-12),
        );
    }
    let in_box = cp
        .lambda_star
        .iter()
        .all(|&l| l > config.eta && l < 1.0 / config.eta);
    for (i, l) in cp.lambda_star.iter().enumerate() {
        out.push(Record::new(
            "lambda_star",
            format!("i={}", i + 1),
            *l,
            quad(*l, &s.spec),
        ));
    }
    let box_record = Record::new(
        "lambda_star_in_box",
        format!("eta={}", config.eta),
        in_box as u8 as f64,
        0.0,
    );
    // the box is only expected to hold λ* for k ≤ 1
    out.push(if k <= 1 {
        box_record.flag(in_box)
    } else {
        box_record.note("not asserted for k >= 2")
    });
    let zeta_norm = cp
        .zeta_star
        .iter()
        .flatten()
        .map(|z| z * z)
        .sum::<f64>()
        .sqrt();
    out.push(Record::new("zeta_star_norm", "", zeta_norm, 0.0));
    out.push(Record::new("gradient_norm", "", cp.gradient_norm, 0.0).within(0.0, 1e-10 * scale));
    out.push(
        Record::new(
            "min_singular_value",
            "",
            cp.hessian_certificate.min_singular_value,
            0.0,
        )
        .flag(cp.hessian_certificate.min_singular_value > 1e-6 * scale)
        .note(format!("threshold {:e}", 1e-6 * scale)),
    );
    for (i, spectrum) in cp.hessian_certificate.g_spectra.iter().enumerate() {
        for (j, ev) in spectrum.iter().enumerate() {
            out.push(Record::new(
                "g_hessian_eigenvalue",
                format!("i={},j={}", i + 1, j + 1),
                *ev,
                0.0,
            ));
        }
    }
    let starts: [(f64, f64); 2] = [(1.2, 0.05), (0.8, -0.05)];
    for (f, z) in starts {
        let start = ReducedPoint {
            s: cp.s_hat.iter().map(|v| f * v).collect(),
            zeta: (0..k)
                .map(|i| {
                    let mut v = vec![0.0; dim];
                    v[i % dim] = z;
                    v
                })
                .collect(),
        };
        let key = format!("start={f}*s_hat,zeta={z}");
        let found = newton_refine(&start, c, &s.spec)?;
        let s_err = found
            .s_hat
            .iter()
            .zip(&cp.s_hat)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0f64, f64::max);
        let z_err = found
            .zeta_star
            .iter()
            .flatten()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        out.push(Record::new(
            "newton_iterations",
            key.clone(),
            found.iterations as f64,
            0.0,
        ));
        out.push(Record::new("newton_error", key, s_err.max(z_err), 0.0).within(0.0, 1e-8));
    }
    for i in 1..=k {
        let h = g_hessian_at_zero(i, c, &s.table, &s.spec)?;
        let key = format!("i={i}");
        let diag = h.diagonal();
        let mean = diag.iter().sum::<f64>() / diag.len() as f64;
        out.push(Record::new("g_hessian_fd_diagonal", key.clone(), mean, 0.0));
        out.push(
            Record::new(
                "g_hessian_closed_form",
                key.clone(),
                h.closed_form,
                quad(h.closed_form, &s.spec),
            )
            .reference(mean)
            .note("b3 term only; omits the curvature of the logarithmic term"),
        );
        out.push(
            Record::new(
                "g_hessian_corrected",
                key.clone(),
                h.corrected,
                quad(h.corrected, &s.spec),
            )
            .flag(h.relative_gap(h.corrected) <= 1e-4)
            .reference(mean)
            .note("worst diagonal gap within 1e-4 relative"),
        );
        out.push(
            Record::new(
                "g_hessian_offdiag_ratio",
                key.clone(),
                h.off_diagonal_ratio(),
                0.0,
            )
            .within(0.0, 1e-5),
        );
        out.push(
            Record::new(
                "g_hessian_diag_spread",
                key.clone(),
                h.diagonal_spread(),
                0.0,
            )
            .within(0.0, 1e-6),
        );
        for (rho, g) in g_ray(i, config.eta, 11, c, &s.spec)? {
            out.push(
                Record::new("g_ray", format!("i={i},rho={rho}"), g, quad(g, &s.spec))
                    .note("exploratory"),
            );
        }
    }
    Ok(out)
}

fn tower(config: &RunConfig) -> Result<Output> {
    let s = setup(config)?;
    let lam = lambda(config, &s)?;
    let k = s.model.k;
    let mut out = Output::default();
    for &eps in &config.eps_grid {
        let params = TowerParams::radial(lam.clone(), s.model.dim, eps)?;
        let grid = RadialGrid::for_tower(&s.model, &params, DEFAULT_R_MIN, MIN_NODES_PER_DECADE)?;
        let field = build_tower(&s.model, &params, &grid)?;
        let key = eps_key(eps);
        out.grids
            .insert(format!("tower_nodes_{key}"), grid.nodes.len());
        let amp = field.amplitude();
        out.push(
            Record::new(
                "sign_changes",
                key.clone(),
                sign_changes(&field) as f64,
                0.0,
            )
            .within(k as f64, 0.0),
        );
        out.push(Record::new("amplitude", key.clone(), amp, 0.0));
        out.push(
            Record::new("boundary_value", key.clone(), field.boundary_value(), 0.0)
                .within(0.0, 1e-10 * amp),
        );
        let res = residual(&field, &s.spec)?;
        let mirrored = residual(&field.negated(), &s.spec)?;
        out.push(Record::new(
            "dual_norm",
            key.clone(),
            res.dual_norm,
            quad(res.dual_norm, &s.spec),
        ));
        let same = res.dual_norm.to_bits() == mirrored.dual_norm.to_bits();
        out.push(
            Record::new(
                "negated_dual_norm_identical",
                key.clone(),
                same as u8 as f64,
                0.0,
            )
            .flag(same),
        );
        out.artifacts.push(Artifact {
            file_name: format!("tower-field-eps{eps}.csv"),
            contents: field_csv(&field.grid.nodes, &field.values)?,
        });
    }
    for (i, l) in lam.iter().enumerate() {
        out.push(Record::new("lambda", format!("i={}", i + 1), *l, 0.0));
    }
    Ok(out)
}

fn residual_sweep(config: &RunConfig) -> Result<Output> {
    let s = setup(config)?;
    let lam = lambda(config, &s)?;
    let grid = descending(&config.eps_grid);
    let sweep = decay_sweep(&s.model, &lam, &grid, &s.coeffs, &s.spec)?;
    let mut out = Output::default();
    for row in &sweep.rows {
        let key = eps_key(row.epsilon);
        out.push(Record::new(
            "dual_norm",
            key.clone(),
            row.dual_norm,
            quad(row.dual_norm, &s.spec),
        ));
        out.push(Record::new(
            "splitting_error",
            key.clone(),
            row.splitting_error,
            quad(row.splitting_error, &s.spec),
        ));
        out.push(Record::new(
            "remainder_over_eps",
            key.clone(),
            row.remainder_over_eps,
            0.0,
        ));
        out.push(Record::new(
            "projection_error",
            key.clone(),
            row.projection_error,
            quad(row.projection_error, &s.spec),
        ));
        out.push(Record::new("sigma", key, row.sigma, 0.0).unit("r"));
    }
    let n = s.model.dim as f64;
    let dual: Vec<f64> = sweep.rows.iter().map(|r| r.dual_norm).collect();
    let decreasing = strictly_decreasing(&dual);
    out.push(
        Record::new("dual_norm_decreasing", "", decreasing as u8 as f64, 0.0).flag(decreasing),
    );
    let fits = [
        (
            "dual_norm_slope",
            sweep.dual_norm_fit,
            Some(correction_exponent(s.model.dim, s.model.k)),
            None,
        ),
        (
            "splitting_slope",
            sweep.splitting_fit,
            Some((n + 2.0) / (2.0 * (n - 2.0))),
            Some(0.15),
        ),
        ("remainder_slope", sweep.remainder_fit, None, None),
        (
            "projection_slope_in_sigma",
            sweep.projection_fit,
            Some((n - 4.0) / 2.0),
            None,
        ),
    ];
    for (name, fit, reference, tol) in fits {
        let mut r =
            Record::new(name, "", fit.slope, 0.0).note(format!("r_squared={}", fit.r_squared));
        r = match (reference, tol) {
            (Some(x), Some(t)) => r.within(x, t),
            (Some(x), None) => r.reference(x),
            _ => r,
        };
        out.push(r);
    }
    out.push(Record::new("fits_r_squared_ok", "", sweep.pass as u8 as f64, 0.0).flag(sweep.pass));
    Ok(out)
}

fn spectrum(config: &RunConfig) -> Result<Output> {
    let settings = config.spectrum_settings();
    let rep = spectrum_check(config.dim, config.mu, &settings)?;
    let mut out = Output::default();
    out.grids.insert("spectrum_nodes".into(), settings.nodes);
    out.grids
        .insert("spectrum_nodes_refined".into(), 2 * settings.nodes);
    let key = format!("mu={}", config.mu);
    for (j, tol) in [(0, 1e-3), (1, 2e-3)] {
        let name = if j == 0 { "lambda1" } else { "lambda2" };
        out.push(
            Record::new(name, key.clone(), rep.extrapolated[j], rep.error_bar[j])
                .within(rep.exact[j], tol),
        );
        out.push(Record::new(
            &format!("{name}_coarse"),
            key.clone(),
            rep.coarse[j],
            0.0,
        ));
        out.push(Record::new(
            &format!("{name}_fine"),
            key.clone(),
            rep.fine[j],
            0.0,
        ));
        let change = (rep.fine[j] - rep.coarse[j]).abs();
        out.push(
            Record::new(
                &format!("{name}_refinement_change"),
                key.clone(),
                change,
                0.0,
            )
            .within(0.0, 1e-3),
        );
    }
    out.push(
        Record::new("eigenvector_cosine", key, rep.eigenvector_cosine, 0.0)
            .flag(rep.eigenvector_cosine >= 0.999),
    );
    Ok(out)
}

fn interaction_kinds(k: usize) -> Vec<InteractionKind> {
    let mut kinds = Vec::new();
    for i in 1..=k {
        kinds.push(InteractionKind::HardySelf { i });
        for j in i + 1..=k + 1 {
            kinds.push(InteractionKind::GradientCross { i, j });
        }
        for j in i + 1..=k {
            kinds.push(InteractionKind::HardyCross { i, j });
        }
    }
    kinds.push(InteractionKind::TowerMass);
    kinds.push(InteractionKind::LogMass);
    kinds
}

fn kind_key(kind: InteractionKind) -> (String, String) {
    match kind {
        InteractionKind::HardySelf { i } => ("hardy_self".into(), format!("i={i}")),
        InteractionKind::HardyCross { i, j } => ("hardy_cross".into(), format!("i={i},j={j}")),
        InteractionKind::GradientCross { i, j } => {
            ("gradient_cross".into(), format!("i={i},j={j}"))
        }
        InteractionKind::VUCross { i } => ("v_u_cross".into(), format!("i={i}")),
        InteractionKind::TowerMass => ("tower_mass".into(), String::new()),
        InteractionKind::LogMass => ("log_mass".into(), String::new()),
    }
}

fn interactions(config: &RunConfig) -> Result<Output> {
    let s = setup(config)?;
    let k = s.model.k;
    let lam = config.lambda.clone().unwrap_or_else(|| vec![1.0; k + 1]);
    let grid = descending(&config.eps_grid);
    let kinds = interaction_kinds(k);
    let mut out = Output::default();
    for kind in kinds {
        let rows = grid
            .par_iter()
            .map(|&eps| -> Result<_> {
                let params = TowerParams::radial(lam.clone(), s.model.dim, eps)?;
                Ok(interaction_integrals(
                    kind, &s.model, &params, &s.table, &s.spec,
                )?)
            })
            .collect::<Result<Vec<_>>>()?;
        let (name, idx) = kind_key(kind);
        let sep = if idx.is_empty() { "" } else { "," };
        for r in &rows {
            let key = format!("{idx}{sep}{}", eps_key(r.epsilon));
            out.push(
                Record::new(&name, key.clone(), r.value, quad(r.value, &s.spec))
                    .reference(r.predicted),
            );
            out.push(Record::new(
                &format!("{name}_remainder_over_eps"),
                key,
                r.remainder_over_eps(),
                0.0,
            ));
        }
        let last = rows.last().expect("grid is non-empty");
        let adjacent = match kind {
            InteractionKind::HardySelf { .. } => true,
            InteractionKind::GradientCross { i, j } => j == i + 1,
            _ => false,
        };
        let vanishing = matches!(kind, InteractionKind::HardyCross { .. })
            || matches!(kind, InteractionKind::GradientCross { i, j } if j > i + 1);
        if adjacent {
            out.push(
                Record::new(
                    &format!("{name}_ratio"),
                    format!("{idx}{sep}{}", eps_key(last.epsilon)),
                    last.value / last.predicted,
                    0.0,
                )
                .within_rel(1.0, 0.1),
            );
        }
        if vanishing || kind == InteractionKind::TowerMass {
            let scaled: Vec<f64> = rows.iter().map(|r| r.remainder_over_eps().abs()).collect();
            let ok = grid.len() < 2 || strictly_decreasing(&scaled);
            out.push(
                Record::new(
                    &format!("{name}_remainder_decreasing"),
                    idx,
                    ok as u8 as f64,
                    0.0,
                )
                .flag(ok),
            );
        }
    }
    for (i, l) in lam.iter().enumerate() {
        out.push(Record::new("lambda", format!("i={}", i + 1), *l, 0.0));
    }
    Ok(out)
}
