//! Acceptance suite: every criterion at its stated tolerance, one line each.
//!
//! Runs as a plain binary (`harness = false`). The process fails when a
//! criterion fails, unless that criterion is listed in `UNATTAINABLE` with the
//! reason it cannot hold; such lines still print as FAIL. Set
//! `ACCEPTANCE_STRICT=1` to fail on those as well.

use std::process::{Command, ExitCode};
use std::time::Instant;

use clap::Parser;

use hardy_tower::fit::{log_grid, loglog_fit};
use hardy_tower::profiles::hardy_exponents;
use hardy_tower::projection::{projection_error_norms, radial_phi_remainder, ProjectedField};
use hardy_tower::quadrature::{closed_form_moments, taylor_residuals, MomentTable, QuadratureSpec};
use hardy_tower::tower::{profile_residual, spectrum_check, SpectrumSettings};
use hardy_tower_cli::{run, Cli, Record, Report, RunConfig};

/// Criteria that fail by construction, with the reason.
const UNATTAINABLE: &[(u32, &str)] = &[(
    8,
    "the quoted g-Hessian closed form keeps only the b3 term; the log h1 term adds \
     -(N-2)(k+1-i)b4 to every diagonal entry, so the literal value cannot match finite differences",
)];

struct Line {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn cli(args: &[&str]) -> Report {
    let argv = std::iter::once("hardy-tower").chain(args.iter().copied());
    let parsed = Cli::try_parse_from(argv).expect("valid arguments");
    let config = RunConfig::resolve(&parsed).expect("valid configuration");
    run(&config).0
}

fn records<'a>(report: &'a Report, quantity: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
    report
        .records
        .iter()
        .filter(move |r| r.quantity == quantity)
}

fn record<'a>(report: &'a Report, quantity: &'a str) -> &'a Record {
    records(report, quantity)
        .next()
        .unwrap_or_else(|| panic!("{} report has no {quantity}", report.command))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn beta_oracles() -> Line {
    let start = Instant::now();
    let spec = QuadratureSpec::default();
    let table = MomentTable::compute(7, 0.0, &spec).expect("moment table");
    let cf = closed_form_moments(7).expect("closed forms");
    let gaps = [
        ("m_p", rel(table.m_p, cf.m_p)),
        ("h1(0)", rel(table.h1_zero, cf.h1_zero)),
        ("h2(0)", rel(table.h2_zero, cf.h2_zero)),
        ("U mass", rel(table.u_mass, cf.u_mass)),
        ("g-Hessian integral", rel(table.curvature, cf.curvature)),
    ];
    let secs = start.elapsed().as_secs_f64();
    let worst = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
    Line {
        id: 1,
        title: "moments match Beta oracles to 1e-8, under 10 s",
        pass: worst <= 1e-8 && secs < 10.0,
        detail: format!("worst relative gap {worst:.2e}, {secs:.2} s"),
    }
}

fn spectrum() -> Line {
    let mut pass = true;
    let mut parts = vec![];
    for mu in [0.1, 0.5, 2.0] {
        let start = Instant::now();
        let rep = spectrum_check(7, mu, &SpectrumSettings::default()).expect("spectrum");
        let secs = start.elapsed().as_secs_f64();
        let d1 = (rep.extrapolated[0] - 1.0).abs();
        let d2 = (rep.extrapolated[1] - 9.0 / 5.0).abs();
        let refine = (0..2)
            .map(|j| (rep.fine[j] - rep.coarse[j]).abs())
            .fold(0.0, f64::max);
        pass &= d1 <= 1e-3 && d2 <= 2e-3 && refine < 1e-3 && secs < 60.0;
        parts.push(format!(
            "mu={mu}: |L1-1|={d1:.1e} |L2-1.8|={d2:.1e} refine={refine:.1e} {secs:.1}s"
        ));
    }
    Line {
        id: 2,
        title: "linearised spectrum at N=7, mu in {0.1, 0.5, 2}",
        pass,
        detail: parts.join("; "),
    }
}

fn taylor_laws() -> Line {
    let mus = log_grid(1e-4, 1e-2, 5).expect("grid");
    let rep = taylor_residuals(7, &mus, &QuadratureSpec::default()).expect("taylor residuals");
    let (c, s) = (rep.c_mu_fit.slope, rep.s_mu_fit.slope);
    Line {
        id: 3,
        title: "C_mu and S_mu Taylor residual slopes 2 +- 0.1",
        pass: (c - 2.0).abs() <= 0.1 && (s - 2.0).abs() <= 0.1,
        detail: format!("C_mu slope {c:.4}, S_mu slope {s:.4}"),
    }
}

fn projection_rates() -> Line {
    let spec = QuadratureSpec::default();
    let scales = log_grid(1e-4, 1e-2, 5).expect("grid");
    let sigma =
        projection_error_norms(7, 0.0, &scales, ProjectedField::Sigma, &spec).expect("sigma rate");
    let delta =
        projection_error_norms(7, 0.0, &scales, ProjectedField::Delta, &spec).expect("delta rate");
    let exps = hardy_exponents(7, 0.5).expect("exponents");
    let sig = [1e-2, 1e-3, 1e-4];
    let rem: Vec<f64> = sig
        .iter()
        .map(|&s| radial_phi_remainder(&exps, s))
        .collect();
    let phi = loglog_fit(&sig, &rem).expect("fit").slope;
    let (a, b) = (sigma.fit.slope, delta.fit.slope);
    Line {
        id: 4,
        title: "projection slope 1.5 +- 0.15, boundary remainder slope 4.5 +- 0.3",
        pass: (a - 1.5).abs() <= 0.15 && (b - 1.5).abs() <= 0.15 && (phi - 4.5).abs() <= 0.3,
        detail: format!("sigma {a:.4}, delta {b:.4}, remainder {phi:.4}"),
    }
}

fn expansion() -> Line {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = vec![];
    for k in ["0", "1"] {
        let rep = cli(&["expansion", "--k", k, "--mu0", "1"]);
        let rem: Vec<f64> = records(&rep, "remainder_over_eps")
            .map(|r| r.value)
            .collect();
        let ok = rem.len() == 4 && rem.windows(2).all(|w| w[1] < w[0]);
        pass &= ok;
        let shown: Vec<String> = rem.iter().map(|v| format!("{v:.0}")).collect();
        parts.push(format!("k={k}: {}", shown.join(" > ")));
    }
    let secs = start.elapsed().as_secs_f64();
    Line {
        id: 5,
        title: "energy expansion remainder / eps strictly decreasing, k in {0, 1}",
        pass: pass && secs < 300.0,
        detail: format!("{}; {secs:.1} s", parts.join("; ")),
    }
}

fn interactions() -> Line {
    let mut pass = true;
    let mut parts = vec![];
    for k in ["1", "2"] {
        let rep = cli(&["interactions", "--k", k]);
        for q in ["gradient_cross_ratio", "hardy_self_ratio"] {
            for r in records(&rep, q) {
                pass &= r.pass == Some(true);
                parts.push(format!("k={k} {q}[{}]={:.4}", r.key, r.value));
            }
        }
        for q in [
            "gradient_cross_remainder_decreasing",
            "hardy_cross_remainder_decreasing",
        ] {
            for r in records(&rep, q) {
                pass &= r.pass == Some(true);
                parts.push(format!("k={k} {q}[{}]={}", r.key, r.pass == Some(true)));
            }
        }
    }
    Line {
        id: 6,
        title: "adjacent interactions within 10%, non-adjacent terms decay",
        pass,
        detail: parts.join("; "),
    }
}

fn splitting() -> Line {
    let rep = cli(&["residual-sweep", "--k", "1"]);
    let slope = record(&rep, "splitting_slope").value;
    Line {
        id: 7,
        title: "splitting-error slope 0.9 +- 0.15 at N=7, k=1",
        pass: (slope - 0.9).abs() <= 0.15,
        detail: format!("slope {slope:.4}"),
    }
}

fn critical_point() -> Line {
    let mut newton = true;
    let mut literal = true;
    let mut corrected = true;
    let mut certificate = true;
    let mut parts = vec![];
    for k in ["1", "2"] {
        let rep = cli(&["critical-point", "--k", k]);
        let worst = records(&rep, "newton_error")
            .map(|r| r.value)
            .fold(0.0, f64::max);
        newton &= records(&rep, "newton_error").count() > 0 && worst <= 1e-8;
        let sv = record(&rep, "min_singular_value").value;
        certificate &= sv > 0.0;
        for r in records(&rep, "g_hessian_closed_form") {
            let fd = r.reference.expect("finite-difference reference");
            let gap = rel(r.value, fd);
            literal &= gap <= 1e-4;
            parts.push(format!(
                "k={k} [{}] closed form {:.4e} vs fd {fd:.4e} (gap {gap:.2e})",
                r.key, r.value
            ));
        }
        for r in records(&rep, "g_hessian_corrected") {
            corrected &= r.pass == Some(true);
        }
        parts.push(format!("k={k} newton {worst:.1e}, certificate {sv:.4e}"));
    }
    parts.push(format!("corrected Hessian within 1e-4: {corrected}"));
    Line {
        id: 8,
        title: "Newton recovery 1e-8, g-Hessian closed form vs FD 1e-4, positive certificate",
        pass: newton && literal && certificate,
        detail: parts.join("; "),
    }
}

fn tower() -> Line {
    let mut pass = true;
    let mut parts = vec![];
    for k in ["0", "1", "2"] {
        let rep = cli(&["tower", "--k", k, "--eps-grid", "1e-3"]);
        let r = record(&rep, "sign_changes");
        pass &= r.pass == Some(true);
        parts.push(format!("k={k} sign changes {}", r.value));
    }
    for k in ["0", "1"] {
        let rep = cli(&["residual-sweep", "--k", k]);
        let r = record(&rep, "dual_norm_decreasing");
        pass &= r.pass == Some(true);
        parts.push(format!(
            "k={k} dual norm decreasing {}",
            r.pass == Some(true)
        ));
    }
    let worst = [0.0, 0.5, 2.0]
        .iter()
        .map(|&mu| profile_residual(7, mu, 200).expect("profile residual"))
        .fold(0.0, f64::max);
    pass &= worst <= 1e-10;
    parts.push(format!("profile residual {worst:.1e}"));
    Line {
        id: 9,
        title: "tower sign changes, decreasing dual norm, exact-profile residuals",
        pass,
        detail: parts.join("; "),
    }
}

fn binary_output(args: &[&str], threads: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_hardy-tower"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .env_remove("HARDY_TOWER_OUT")
        .output()
        .expect("run hardy-tower");
    out.stdout
}

fn determinism() -> Line {
    let mut pass = true;
    let mut parts = vec![];
    for args in [
        &["interactions", "--k", "2"][..],
        &["residual-sweep", "--k", "1", "--format", "csv"][..],
        &["constants"][..],
    ] {
        let first = binary_output(args, "1");
        let again = binary_output(args, "1");
        let many = binary_output(args, "8");
        let ok = !first.is_empty() && first == again && first == many;
        pass &= ok;
        parts.push(format!("{}: {ok}", args.join(" ")));
    }
    Line {
        id: 10,
        title: "byte-identical reports across runs and thread counts",
        pass,
        detail: parts.join("; "),
    }
}

fn main() -> ExitCode {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let checks: [fn() -> Line; 10] = [
        beta_oracles,
        spectrum,
        taylor_laws,
        projection_rates,
        expansion,
        interactions,
        splitting,
        critical_point,
        tower,
        determinism,
    ];
    let mut unexpected = 0;
    let mut documented = 0;
    for check in checks {
        let line = check();
        let tag = if line.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {}: {}", line.id, line.title, line.detail);
        if !line.pass {
            match UNATTAINABLE.iter().find(|(id, _)| *id == line.id) {
                Some((_, why)) => {
                    documented += 1;
                    println!("        unattainable as stated: {why}");
                }
                None => unexpected += 1,
            }
        }
    }
    println!(
        "acceptance: {} passed, {} failed ({documented} documented as unattainable)",
        checks.len() - unexpected - documented,
        unexpected + documented
    );
    if unexpected > 0 || (strict && documented > 0) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
