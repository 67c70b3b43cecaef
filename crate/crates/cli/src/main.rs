mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qcarpet::spectral::ApertureShape;

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "qcarpet", version, about = "Quantum carpets and Bohmian trajectories in an infinite square well")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expansion coefficients, P_N and <H>_N curves, decay fit and spread count.
    Decompose(Common),
    /// Density and velocity rasters over [0, T] plus a symmetry report.
    Carpet(Common),
    /// Bohmian trajectory ensemble over [0, T].
    Trajectories(Common),
    /// Runs the acceptance checks; exit status 3 if any fail.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Restrict to these criterion numbers.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
        /// Scales the recurrence time used by the checks (fault injection).
        #[arg(long, default_value_t = 1.0, hide = true)]
        tau_scale: f64,
    },
    /// Fields at individual points; every x is paired with every t.
    Point {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        t: Vec<f64>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration (or a sidecar from an earlier run).
    #[arg(long)]
    config: Option<PathBuf>,
    /// square, triangle, parabola, half-cosine, half-cosine-squared, gaussian
    #[arg(long)]
    shape: Option<ApertureShape>,
    #[arg(long = "L")]
    length: Option<f64>,
    #[arg(long = "w")]
    width: Option<f64>,
    #[arg(long = "m")]
    mass: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long)]
    n_modes: Option<u32>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    /// Time extent; defaults to the recurrence time.
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of uniformly spaced seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Explicit seed positions, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    seed_positions: Option<Vec<f64>>,
    /// Seeds span [-a, a]; defaults to w/2.
    #[arg(long)]
    seed_width: Option<f64>,
    /// Place seeds at quantiles of the initial density.
    #[arg(long)]
    density_seeds: bool,
    /// Output samples per trajectory.
    #[arg(long)]
    samples: Option<usize>,
    /// Project the profile numerically instead of using closed forms.
    #[arg(long)]
    quadrature: bool,
    /// Also write raster values as CSV matrices.
    #[arg(long)]
    csv: bool,
    /// Existing output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let config = base.apply(Overrides {
            shape: self.shape.clone(),
            length: self.length,
            width: self.width,
            mass: self.mass,
            hbar: self.hbar,
            n_modes: self.n_modes,
            nx: self.nx,
            nt: self.nt,
            t_max: self.t_max,
            seeds: self.seeds,
            seed_positions: self.seed_positions.clone(),
            seed_width: self.seed_width,
            density_seeds: self.density_seeds,
            samples: self.samples,
            quadrature: self.quadrature,
            csv_matrix: self.csv,
            out: self.out.clone(),
            jobs: self.jobs,
        });
        config.validate()?;
        if let Some(jobs) = config.jobs {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .map_err(|e| CliError::Validation(format!("cannot size worker pool: {e}")))?;
        }
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let written = match &cli.command {
        Command::Decompose(c) => commands::decompose(&c.resolve()?)?,
        Command::Carpet(c) => commands::carpet(&c.resolve()?)?,
        Command::Trajectories(c) => commands::trajectories(&c.resolve()?)?,
        Command::Verify { common, only, tau_scale } => commands::verify(&common.resolve()?, only, *tau_scale)?,
        Command::Point { common, x, t } => commands::point(&common.resolve()?, x, t)?,
    };
    commands::report(&written);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
