//! Command-line flags, the optional JSON config file, and the resolved run configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use hardy_tower::ansatz::MIN_EPSILON;
use hardy_tower::fit::log_grid;
use hardy_tower::profiles::{mu_bar, ModelParams, DEFAULT_DIM, DEFAULT_ETA};
use hardy_tower::quadrature::QuadratureSpec;
use hardy_tower::tower::SpectrumSettings;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "HARDY_TOWER_OUT";
pub const DEFAULT_EPS_GRID: [f64; 4] = [1e-2, 3e-3, 1e-3, 3e-4];
pub const DEFAULT_TOWER_EPS: f64 = 1e-3;
pub const DEFAULT_SPECTRUM_MU: f64 = 0.5;
pub const MAX_EPSILON: f64 = 0.1;
pub const MAX_K: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    /// Exponents, moments and expansion coefficients.
    Constants,
    /// Remainder of the energy expansion along the ε-grid.
    Expansion,
    /// Ladder ŝ, Newton refinement and Hessian certificate.
    CriticalPoint,
    /// Sample the tower and check its sign structure.
    Tower,
    /// Residual, splitting and remainder rates along the ε-grid.
    ResidualSweep,
    /// First two eigenvalues of the linearization at the Hardy instanton.
    Spectrum,
    /// Interaction integrals against their leading terms.
    Interactions,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Constants => "constants",
            Self::Expansion => "expansion",
            Self::CriticalPoint => "critical-point",
            Self::Tower => "tower",
            Self::ResidualSweep => "residual-sweep",
            Self::Spectrum => "spectrum",
            Self::Interactions => "interactions",
        }
    }
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hardy-tower",
    version,
    about = "Bubble-tower laboratory for the subcritical Hardy problem"
)]
pub struct Cli {
    pub command: CommandName,
    /// Space dimension N (≥ 7).
    #[arg(long = "N")]
    pub dim: Option<usize>,
    /// Tower height (number of instantons above the Hardy level).
    #[arg(long)]
    pub k: Option<usize>,
    /// Hardy coefficient μ₀ in μ = μ₀ε.
    #[arg(long)]
    pub mu0: Option<f64>,
    /// Standalone Hardy strength (spectrum, constants).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Parameter box size η.
    #[arg(long)]
    pub eta: Option<f64>,
    /// ε values as lo:hi:count (log-spaced) or a comma-separated list.
    #[arg(long = "eps-grid")]
    pub eps_grid: Option<String>,
    /// Relative tolerance of the radial quadrature.
    #[arg(long = "rel-tol")]
    pub rel_tol: Option<f64>,
    /// Output directory (defaults to $HARDY_TOWER_OUT, else stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON file with any of the fields of the resolved configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Record wall time in the provenance block (makes reports run-dependent).
    #[arg(long = "wall-time")]
    pub wall_time: bool,
}

/// Fields accepted from `--config`; flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dim: Option<usize>,
    pub k: Option<usize>,
    pub mu0: Option<f64>,
    pub mu: Option<f64>,
    pub eta: Option<f64>,
    pub eps_grid: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub rel_tol: Option<f64>,
    pub spectrum_nodes: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandName,
    pub dim: usize,
    pub k: usize,
    pub mu0: f64,
    pub mu: f64,
    pub eta: f64,
    pub eps_grid: Vec<f64>,
    /// Tower parameters (λ₁..λ_k, λ̄); the critical point λ* when absent.
    pub lambda: Option<Vec<f64>>,
    pub rel_tol: f64,
    pub spectrum_nodes: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
    #[serde(skip)]
    pub wall_time: bool,
}

pub fn parse_eps_grid(text: &str) -> Result<Vec<f64>> {
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .with_context(|| format!("bad number {s:?}"))
    };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        ensure!(parts.len() == 3, "expected lo:hi:count, got {text:?}");
        let count: usize = parts[2]
            .trim()
            .parse()
            .with_context(|| format!("bad count {:?}", parts[2]))?;
        Ok(log_grid(parse(parts[0])?, parse(parts[1])?, count)?)
    } else {
        text.split(',').map(parse).collect()
    }
}

impl RunConfig {
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let eps_grid = match &cli.eps_grid {
            Some(text) => parse_eps_grid(text)?,
            None => file.eps_grid.clone().unwrap_or_else(|| match cli.command {
                CommandName::Tower => vec![DEFAULT_TOWER_EPS],
                _ => DEFAULT_EPS_GRID.to_vec(),
            }),
        };
        let out = cli
            .out
            .clone()
            .or(file.out)
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from));
        let config = Self {
            command: cli.command,
            dim: cli.dim.or(file.dim).unwrap_or(DEFAULT_DIM),
            k: cli.k.or(file.k).unwrap_or(1),
            mu0: cli.mu0.or(file.mu0).unwrap_or(1.0),
            mu: cli.mu.or(file.mu).unwrap_or(DEFAULT_SPECTRUM_MU),
            eta: cli.eta.or(file.eta).unwrap_or(DEFAULT_ETA),
            eps_grid,
            lambda: file.lambda,
            rel_tol: cli
                .rel_tol
                .or(file.rel_tol)
                .unwrap_or(QuadratureSpec::default().rel_tol),
            spectrum_nodes: file
                .spectrum_nodes
                .unwrap_or(SpectrumSettings::default().nodes),
            out,
            format: cli.format.or(file.format).unwrap_or(Format::Json),
            wall_time: cli.wall_time,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks every override against the preconditions of the compute modules.
    pub fn validate(&self) -> Result<()> {
        self.model()?;
        self.spec()?;
        ensure!(
            self.k <= MAX_K,
            "k = {} exceeds the supported maximum {MAX_K}",
            self.k
        );
        ensure!(!self.eps_grid.is_empty(), "the epsilon grid is empty");
        for &e in &self.eps_grid {
            ensure!(
                (MIN_EPSILON..=MAX_EPSILON).contains(&e),
                "epsilon = {e:e} outside the supported range [{MIN_EPSILON:e}, {MAX_EPSILON}]"
            );
        }
        if self.command == CommandName::Spectrum {
            let mb = mu_bar(self.dim);
            ensure!(
                self.mu > 0.0 && self.mu < mb,
                "spectrum needs 0 < mu < {mb}, got {}",
                self.mu
            );
            ensure!(
                self.spectrum_nodes >= 10,
                "spectrum needs at least 10 nodes"
            );
        }
        if let Some(l) = &self.lambda {
            ensure!(
                l.len() == self.k + 1,
                "lambda needs k+1 = {} entries, got {}",
                self.k + 1,
                l.len()
            );
            ensure!(
                l.iter().all(|&v| v > 0.0 && v.is_finite()),
                "lambda entries must be positive"
            );
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            bail!("mu0 must be positive, got {}", self.mu0);
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.dim, self.mu0, self.k, self.eta)?)
    }

    pub fn spec(&self) -> Result<QuadratureSpec> {
        let spec = QuadratureSpec::default().with_rel_tol(self.rel_tol);
        spec.validate()?;
        Ok(spec)
    }

    pub fn spectrum_settings(&self) -> SpectrumSettings {
        SpectrumSettings {
            nodes: self.spectrum_nodes,
            ..SpectrumSettings::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("hardy-tower").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn eps_grid_forms() {
        let g = parse_eps_grid("1e-2:1e-4:3").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[1] - 1e-3).abs() < 1e-15);
        assert_eq!(parse_eps_grid("0.01, 0.001").unwrap(), vec![0.01, 0.001]);
        assert!(parse_eps_grid("1:2").is_err());
    }

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::resolve(&cli(&["tower", "--k", "2"])).unwrap();
        assert_eq!((c.dim, c.k, c.mu0), (7, 2, 1.0));
        assert_eq!(c.eps_grid, vec![DEFAULT_TOWER_EPS]);
        let c = RunConfig::resolve(&cli(&["expansion", "--eps-grid", "1e-2,1e-3"])).unwrap();
        assert_eq!(c.eps_grid, vec![1e-2, 1e-3]);
    }

    #[test]
    fn validation_rejects_bad_overrides() {
        assert!(RunConfig::resolve(&cli(&["constants", "--N", "5"])).is_err());
        assert!(RunConfig::resolve(&cli(&["expansion", "--eps-grid", "1e-5"])).is_err());
        assert!(RunConfig::resolve(&cli(&["spectrum", "--mu", "7"])).is_err());
        assert!(RunConfig::resolve(&cli(&["constants", "--rel-tol", "1e-16"])).is_err());
        assert!(Cli::try_parse_from(["hardy-tower", "bogus"]).is_err());
    }
}
