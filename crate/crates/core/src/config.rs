//! Run configuration, read from TOML (primary) or JSON.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::averaging::{DEFAULT_QUADRATURE_NODES, DEFAULT_TOL_GRAD};
use crate::continuation::{default_eps_grid, ContinuationConfig};
use crate::error::{Error, Result};
use crate::flow::IntegratorConfig;
use crate::forcing::ForcingSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
    Text,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Text => "txt",
        }
    }
}

fn default_n() -> i64 {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed_grid() -> [usize; 3] {
    [8, 3, 3]
}

fn default_quadrature_nodes() -> usize {
    DEFAULT_QUADRATURE_NODES
}

fn default_tol_grad() -> f64 {
    DEFAULT_TOL_GRAD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub forcing: ForcingSpec,
    #[serde(rename = "N", alias = "n", default = "default_n")]
    pub n: i64,
    #[serde(default = "default_eps_grid")]
    pub eps_grid: Vec<f64>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default = "default_quadrature_nodes")]
    pub quadrature_nodes: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_seed_grid")]
    pub seed_grid: [usize; 3],
    #[serde(default)]
    pub report_format: ReportFormat,
    #[serde(default = "default_tol_grad")]
    pub tol_grad: f64,
    /// Also sample `γ_N` on this grid and export it as CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_grid: Option<[usize; 3]>,
}

impl RunConfig {
    pub fn new(forcing: ForcingSpec) -> Self {
        Self {
            forcing,
            n: default_n(),
            eps_grid: default_eps_grid(),
            integrator: IntegratorConfig::default(),
            quadrature_nodes: default_quadrature_nodes(),
            output_dir: default_output_dir(),
            seed_grid: default_seed_grid(),
            report_format: ReportFormat::default(),
            tol_grad: default_tol_grad(),
            gamma_grid: None,
        }
    }

    /// Parse by extension: `.json` as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = if is_json(path) {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("N must be nonzero".into()));
        }
        if self.eps_grid.is_empty()
            || self.eps_grid[0] <= 0.0
            || self.eps_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config(
                "eps_grid must be positive and strictly increasing".into(),
            ));
        }
        self.integrator
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.quadrature_nodes < 8 {
            return Err(Error::Config("quadrature_nodes must be at least 8".into()));
        }
        if self.seed_grid.contains(&0) {
            return Err(Error::Config("seed_grid entries must be positive".into()));
        }
        if self.gamma_grid.is_some_and(|g| g.iter().any(|&k| k < 2)) {
            return Err(Error::Config(
                "gamma_grid entries must be at least 2".into(),
            ));
        }
        if self.tol_grad <= 0.0 {
            return Err(Error::Config("tol_grad must be positive".into()));
        }
        Ok(())
    }

    pub fn continuation(&self) -> ContinuationConfig {
        ContinuationConfig {
            integrator: self.integrator,
            ..ContinuationConfig::default()
        }
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// A standalone forcing file, TOML or JSON.
pub fn load_forcing(path: &Path) -> Result<ForcingSpec> {
    let text = std::fs::read_to_string(path)?;
    if is_json(path) {
        Ok(serde_json::from_str(&text)?)
    } else {
        Ok(toml::from_str(&text)?)
    }
}
