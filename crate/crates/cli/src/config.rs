//! Run configuration: one JSON file plus command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use qcarpet::spectral::ApertureShape;
use qcarpet::WellConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientMethod {
    #[default]
    Analytic,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub count: usize,
    /// Seeds span `[-half_width, half_width]`; defaults to `w/2`.
    pub half_width: Option<f64>,
    /// Explicit positions; overrides `count` and `half_width`.
    pub positions: Option<Vec<f64>>,
    /// Place seeds at quantiles of the initial density instead of uniformly.
    pub density_weighted: bool,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            count: 20,
            half_width: None,
            positions: None,
            density_weighted: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub well: WellConfig,
    pub shape: ApertureShape,
    pub n_modes: u32,
    pub coefficients: CoefficientMethod,
    pub nx: usize,
    pub nt: usize,
    /// Time extent; the recurrence time when absent.
    pub t_max: Option<f64>,
    pub seeds: SeedConfig,
    /// Output samples per trajectory.
    pub samples: usize,
    pub rtol: f64,
    /// Absolute position tolerance; `1e-10 L` when absent.
    pub atol: Option<f64>,
    /// Also write raw CSV matrices next to the rasters.
    pub csv_matrix: bool,
    pub out: PathBuf,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            well: WellConfig::default(),
            shape: ApertureShape::HalfCosineSquared,
            n_modes: 200,
            coefficients: CoefficientMethod::Analytic,
            nx: 1001,
            nt: 1001,
            t_max: None,
            seeds: SeedConfig::default(),
            samples: 2000,
            rtol: 1e-8,
            atol: None,
            csv_matrix: false,
            out: PathBuf::from("."),
            jobs: None,
        }
    }
}

/// Flag values that replace fields of the loaded configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub shape: Option<ApertureShape>,
    pub length: Option<f64>,
    pub width: Option<f64>,
    pub mass: Option<f64>,
    pub hbar: Option<f64>,
    pub n_modes: Option<u32>,
    pub nx: Option<usize>,
    pub nt: Option<usize>,
    pub t_max: Option<f64>,
    pub seeds: Option<usize>,
    pub seed_positions: Option<Vec<f64>>,
    pub seed_width: Option<f64>,
    pub density_seeds: bool,
    pub samples: Option<usize>,
    pub quadrature: bool,
    pub csv_matrix: bool,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    /// Reads a configuration file. A sidecar written by a previous run is accepted
    /// too: its embedded `run_config` is used.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{} is not valid JSON: {e}", path.display())))?;
        let inner = value.get("run_config").cloned().unwrap_or(value);
        serde_json::from_value(inner).map_err(|e| CliError::Validation(format!("bad config {}: {e}", path.display())))
    }

    pub fn apply(mut self, o: Overrides) -> Self {
        if let Some(s) = o.shape {
            self.shape = s;
        }
        if let Some(v) = o.length {
            self.well.length = v;
        }
        if let Some(v) = o.width {
            self.well.width = v;
        }
        if let Some(v) = o.mass {
            self.well.mass = v;
        }
        if let Some(v) = o.hbar {
            self.well.hbar = v;
        }
        if let Some(v) = o.n_modes {
            self.n_modes = v;
        }
        if let Some(v) = o.nx {
            self.nx = v;
        }
        if let Some(v) = o.nt {
            self.nt = v;
        }
        if let Some(v) = o.t_max {
            self.t_max = Some(v);
        }
        if let Some(v) = o.seeds {
            self.seeds.count = v;
            self.seeds.positions = None;
        }
        if let Some(v) = o.seed_positions {
            self.seeds.positions = Some(v);
        }
        if let Some(v) = o.seed_width {
            self.seeds.half_width = Some(v);
        }
        if o.density_seeds {
            self.seeds.density_weighted = true;
        }
        if let Some(v) = o.samples {
            self.samples = v;
        }
        if o.quadrature {
            self.coefficients = CoefficientMethod::Quadrature;
        }
        if o.csv_matrix {
            self.csv_matrix = true;
        }
        if let Some(v) = o.out {
            self.out = v;
        }
        if let Some(v) = o.jobs {
            self.jobs = Some(v);
        }
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.well.validate()?;
        self.shape.validate(&self.well)?;
        if self.n_modes == 0 {
            return Err(CliError::Validation("--n-modes must be at least 1".into()));
        }
        if self.nx < 2 || self.nt < 2 {
            return Err(CliError::Validation("--nx and --nt must be at least 2".into()));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Validation(format!("--t-max must be positive (got {t})")));
            }
        }
        if self.samples == 0 {
            return Err(CliError::Validation("trajectory samples must be at least 1".into()));
        }
        if !(self.rtol > 0.0) || self.atol.is_some_and(|a| !(a > 0.0)) {
            return Err(CliError::Validation("tolerances must be positive".into()));
        }
        if let Some(p) = &self.seeds.positions {
            let mut sorted = p.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(CliError::Validation("duplicate seed positions".into()));
            }
            let half = self.well.half_length();
            if let Some(x) = p.iter().find(|x| !(x.abs() < half)) {
                return Err(CliError::Validation(format!("seed {x} lies outside the open box (-{half}, {half})")));
            }
            if p.is_empty() {
                return Err(CliError::Validation("seed list is empty".into()));
            }
        } else if self.seeds.count == 0 {
            return Err(CliError::Validation("--seeds must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Validation("--jobs must be at least 1".into()));
        }
        if !self.out.is_dir() {
            return Err(CliError::Validation(format!(
                "output directory {} does not exist",
                self.out.display()
            )));
        }
        Ok(())
    }
}
