//! Command-line driver: assemble the wave system, compute Gramians, reduce, bound,
//! simulate and tabulate errors against bounds.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use levymor::{Forcing, Integrator, Method, NoiseSpec};

pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "levymor",
    version,
    about = "BT/SPA model reduction for linear SDEs with Lévy noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write the system JSON (n, m, p, row-major a, b, c and q_m).
    Assemble,
    /// Write both Gramians and the Hankel singular values.
    Gramians,
    /// Reduce to order --r with --method; writes the reduced system and hsv.csv.
    Reduce,
    /// Error bounds of both methods at --r or over the sweep.
    Bound,
    /// One output trajectory; with --r also the reduced trajectory and error statistics.
    Simulate,
    /// Errors and bounds of both methods over the sweep (bounds only with --samples 0).
    Table,
    /// The balanced three-state example.
    #[command(name = "demo3x3")]
    Demo3x3,
}

/// Overrides applied on top of `--config` (or the defaults).
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// RunConfig JSON file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// System JSON to load instead of assembling the wave system.
    #[arg(long, global = true)]
    pub system: Option<PathBuf>,
    /// Galerkin state dimension (even).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Damping.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Half-width of the output averaging window around the midpoint.
    #[arg(long, global = true)]
    pub eps_window: Option<f64>,
    #[arg(long, global = true)]
    pub quad_nodes: Option<usize>,
    /// JSON list of input weighting functions.
    #[arg(long, global = true)]
    pub forcings: Option<PathBuf>,
    /// NoiseSpec JSON.
    #[arg(long, global = true)]
    pub noise: Option<PathBuf>,
    #[arg(long, global = true)]
    pub prune_tol: Option<f64>,
    /// bt or spa.
    #[arg(long, global = true)]
    pub method: Option<Method>,
    #[arg(long, global = true)]
    pub r: Option<usize>,
    /// Comma-separated reduced orders.
    #[arg(long, global = true, value_delimiter = ',')]
    pub r_sweep: Option<Vec<usize>>,
    /// Final time T.
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// exp_euler or euler_maruyama for the full system.
    #[arg(long, global = true)]
    pub integrator: Option<Integrator>,
    /// exp_euler or euler_maruyama for reduced models.
    #[arg(long, global = true)]
    pub rom_integrator: Option<Integrator>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Flags {
    /// Builds the run configuration: defaults, then `--config`, then individual flags.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(path) => output::read_json::<RunConfig>(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.system {
            c.system = Some(v.clone());
        }
        if let Some(v) = self.n {
            c.wave.n = v;
        }
        if let Some(v) = self.alpha {
            c.wave.alpha = v;
        }
        if let Some(v) = self.eps_window {
            c.wave.window_halfwidth = v;
        }
        if let Some(v) = self.quad_nodes {
            c.wave.quad_nodes = v;
        }
        if let Some(path) = &self.forcings {
            c.wave.forcings = output::read_json::<Vec<Forcing>>(path)?;
        }
        if let Some(path) = &self.noise {
            c.noise = Some(output::read_json::<NoiseSpec>(path)?);
        }
        if let Some(v) = self.prune_tol {
            c.prune_tol = v;
        }
        if let Some(v) = self.method {
            c.method = v;
        }
        if let Some(v) = self.r {
            c.r = Some(v);
        }
        if let Some(v) = &self.r_sweep {
            c.r_sweep = v.clone();
        }
        if let Some(v) = self.t_end {
            c.t_end = v;
        }
        if let Some(v) = self.dt {
            c.dt = v;
        }
        if let Some(v) = self.samples {
            c.samples = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.integrator {
            c.full_integrator = v;
        }
        if let Some(v) = self.rom_integrator {
            c.rom_integrator = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        Ok(c)
    }
}

/// Runs one command; returns the files written.
pub fn run(command: Command, config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    match command {
        Command::Assemble => commands::assemble(config),
        Command::Gramians => commands::gramians(config),
        Command::Reduce => commands::reduce_cmd(config),
        Command::Bound => commands::bound(config),
        Command::Simulate => commands::simulate(config),
        Command::Table => commands::table(config),
        Command::Demo3x3 => commands::demo3x3(config),
    }
}

/// Parses `args`, runs the command and returns the files written.
pub fn run_args<I, T>(args: I) -> CliResult<Vec<PathBuf>>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Invalid(e.to_string()))?;
    let config = cli.flags.resolve()?;
    run(cli.command, &config)
}
