use std::path::PathBuf;

use levymor::{Integrator, McOptions, Method, NoiseSpec, WaveConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Everything a command needs; every output file records the instance it was run with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// System JSON to load instead of assembling the wave system.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<PathBuf>,
    pub wave: WaveConfig,
    /// Noise driving the system. `None` takes `q_m` from the system file when present and
    /// the reference noise otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    /// Relative tolerance for dropping states with negligible input rows or output columns.
    pub prune_tol: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    pub r_sweep: Vec<usize>,
    pub t_end: f64,
    pub dt: f64,
    pub samples: usize,
    pub seed: u64,
    pub full_integrator: Integrator,
    pub rom_integrator: Integrator,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mc = McOptions::default();
        Self {
            system: None,
            wave: WaveConfig::default(),
            noise: None,
            prune_tol: 1e-13,
            method: Method::Bt,
            r: None,
            r_sweep: vec![2, 4, 8, 16, 32, 64],
            t_end: mc.t_end,
            dt: mc.dt,
            samples: mc.samples,
            seed: mc.seed,
            full_integrator: mc.full_method,
            rom_integrator: mc.rom_method,
            out: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn mc_options(&self, samples: usize) -> McOptions {
        McOptions {
            t_end: self.t_end,
            dt: self.dt,
            samples,
            seed: self.seed,
            full_method: self.full_integrator,
            rom_method: self.rom_integrator,
        }
    }

    /// Checks every field that does not need the system itself.
    pub fn validate(&self) -> CliResult<()> {
        if self.system.is_none() {
            self.wave.validate()?;
            for f in &self.wave.forcings {
                f.validate()?;
            }
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        if !(0.0..1.0).contains(&self.prune_tol) {
            return Err(CliError::Invalid(format!(
                "prune_tol must lie in [0, 1), got {}",
                self.prune_tol
            )));
        }
        if self.r == Some(0) || self.r_sweep.contains(&0) {
            return Err(CliError::Invalid("reduced orders must be >= 1".into()));
        }
        if self.r_sweep.is_empty() {
            return Err(CliError::Invalid("r_sweep must not be empty".into()));
        }
        self.mc_options(self.samples).steps()?;
        Ok(())
    }

    /// The explicit order if given, the sweep otherwise.
    pub fn orders(&self) -> Vec<usize> {
        match self.r {
            Some(r) => vec![r],
            None => self.r_sweep.clone(),
        }
    }
}
