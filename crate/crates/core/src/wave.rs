//! Spectral Galerkin discretisation of the damped stochastic wave equation on `[0, π]`
//! with Dirichlet conditions, observed through local position and velocity averages.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gramians::StableSchur;
use crate::linalg::symmetrize;
use crate::system::StateSpaceSystem;

/// Default composite quadrature resolution (total nodes).
pub const DEFAULT_QUAD_NODES: usize = 20_000;
/// Minimum nodes per unit of mode index.
pub const NODES_PER_MODE: usize = 20;

/// Spatial weighting functions for the noise inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Forcing {
    /// `2 exp(-(ζ - π/2)²)`
    Bump,
    /// `sin(ζ) exp(-(ζ - π/2)²)`
    SineBump,
    /// `sin(k ζ)`
    Sine { k: u32 },
    /// Piecewise linear through `(zeta[i], values[i])`, constant outside the table.
    Tabulated { zeta: Vec<f64>, values: Vec<f64> },
}

impl Forcing {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Forcing::Bump => {
                let d = z - FRAC_PI_2;
                2.0 * (-d * d).exp()
            }
            Forcing::SineBump => {
                let d = z - FRAC_PI_2;
                z.sin() * (-d * d).exp()
            }
            Forcing::Sine { k } => (*k as f64 * z).sin(),
            Forcing::Tabulated { zeta, values } => {
                let last = zeta.len() - 1;
                if z <= zeta[0] {
                    return values[0];
                }
                if z >= zeta[last] {
                    return values[last];
                }
                let i = zeta.partition_point(|&x| x <= z) - 1;
                let w = (z - zeta[i]) / (zeta[i + 1] - zeta[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Forcing::Tabulated { zeta, values } = self {
            if zeta.len() < 2 || zeta.len() != values.len() {
                return Err(Error::InvalidConfig(format!(
                    "tabulated forcing needs >= 2 matching samples, got {} abscissae and {} values",
                    zeta.len(),
                    values.len()
                )));
            }
            if zeta.iter().chain(values).any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(
                    "tabulated forcing has non-finite entries".into(),
                ));
            }
            if zeta.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidConfig(
                    "tabulated forcing abscissae must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveConfig {
    pub n: usize,
    pub alpha: f64,
    pub forcings: Vec<Forcing>,
    pub window_halfwidth: f64,
    pub quad_nodes: usize,
}

impl Default for WaveConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            alpha: 2.0,
            forcings: vec![Forcing::Bump, Forcing::SineBump],
            window_halfwidth: 0.01,
            quad_nodes: DEFAULT_QUAD_NODES,
        }
    }
}

impl WaveConfig {
    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "state dimension must be even and positive, got {}",
                self.n
            )));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "damping must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.window_halfwidth > 0.0 && self.window_halfwidth < FRAC_PI_2) {
            return Err(Error::InvalidConfig(format!(
                "window half-width must lie in (0, pi/2), got {}",
                self.window_halfwidth
            )));
        }
        if self.forcings.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one forcing is required".into(),
            ));
        }
        for f in &self.forcings {
            f.validate()?;
        }
        let modes = self.n / 2;
        let required = NODES_PER_MODE * modes;
        if self.quad_nodes < required {
            return Err(Error::ResolutionTooLow {
                nodes: self.quad_nodes,
                mode: modes,
                required,
            });
        }
        Ok(())
    }
}

const GL10_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL10_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Composite 10-point Gauss-Legendre rule on `[a, b]` with `panels` equal panels.
fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in GL10_NODES.iter().zip(GL10_WEIGHTS) {
            s += w * (f(mid - half * x) + f(mid + half * x));
        }
        total += half * s;
    }
    total
}

/// `∫₀^π f(ζ) sin(ℓ ζ) dζ`.
pub fn sine_coefficient(f: &Forcing, l: usize, quad_nodes: usize) -> Result<f64> {
    let required = NODES_PER_MODE * l;
    if l == 0 || quad_nodes < required {
        return Err(Error::ResolutionTooLow {
            nodes: quad_nodes,
            mode: l,
            required,
        });
    }
    let panels = (quad_nodes / GL10_NODES.len() / 2).max(4 * l);
    let lf = l as f64;
    Ok(gauss_legendre(
        |z| f.eval(z) * (lf * z).sin(),
        0.0,
        PI,
        panels,
    ))
}

/// `sin(ℓ π / 2)`, exact.
fn sin_half_pi(l: usize) -> f64 {
    match l % 4 {
        1 => 1.0,
        3 => -1.0,
        _ => 0.0,
    }
}

/// Window factor `cos(ℓ(π/2 - ε)) - cos(ℓ(π/2 + ε)) = 2 sin(ℓπ/2) sin(ℓε)`.
pub fn window_difference(l: usize, eps: f64) -> f64 {
    2.0 * sin_half_pi(l) * (l as f64 * eps).sin()
}

/// `E_ℓ = [[0, ℓ], [-ℓ, -α]]`.
pub fn oscillator_block(l: usize, alpha: f64) -> [[f64; 2]; 2] {
    let lf = l as f64;
    [[0.0, lf], [-lf, -alpha]]
}

/// Assembles `(A, B, C)` with `A = diag(E_1, ..., E_{n/2})`, noise entering the velocity
/// components and two outputs (windowed position and velocity averages around π/2).
pub fn assemble_wave(config: &WaveConfig) -> Result<StateSpaceSystem> {
    config.validate()?;
    let n = config.n;
    let modes = n / 2;
    let m = config.forcings.len();
    let eps = config.window_halfwidth;
    let norm = (2.0 / PI).sqrt();

    let coeffs: Vec<Vec<f64>> = (1..=modes)
        .into_par_iter()
        .map(|l| {
            config
                .forcings
                .iter()
                .map(|f| sine_coefficient(f, l, config.quad_nodes).map(|c| norm * c))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);
    let mut c = DMatrix::zeros(2, n);
    let s2pi = (2.0 * PI).sqrt();
    for l in 1..=modes {
        let i = 2 * (l - 1);
        let e = oscillator_block(l, config.alpha);
        a[(i, i)] = e[0][0];
        a[(i, i + 1)] = e[0][1];
        a[(i + 1, i)] = e[1][0];
        a[(i + 1, i + 1)] = e[1][1];
        for k in 0..m {
            b[(i + 1, k)] = coeffs[l - 1][k];
        }
        let lf = l as f64;
        let d = window_difference(l, eps);
        c[(0, i)] = d / (s2pi * lf * lf * eps);
        c[(1, i + 1)] = d / (s2pi * lf * eps);
    }
    StateSpaceSystem::new(a, b, c)
}

/// Decay rate guaranteed for the damped wave semigroup with smallest eigenvalue `λ̃₁`.
pub fn wave_decay_bound(alpha: f64, lambda1: f64) -> f64 {
    2.0 * alpha * lambda1
        / (4.0 * lambda1 + alpha * (alpha + (alpha * alpha + 4.0 * lambda1).sqrt()))
}

/// Steady-state output second moment `tr(C P Cᵀ)` of the assembled system.
pub fn output_energy(config: &WaveConfig, q_m: &DMatrix<f64>) -> Result<f64> {
    let sys = assemble_wave(config)?;
    let w = symmetrize(&(&sys.b * q_m * sys.b.transpose()));
    let p = StableSchur::new(&sys.a)?.solve_lyapunov(&w)?;
    Ok((&sys.c * &p).component_mul(&sys.c).sum())
}

/// `|E_small - E_large| / E_large` for `E = tr(C P Cᵀ)` at two Galerkin orders.
pub fn galerkin_convergence_probe(
    config: &WaveConfig,
    q_m: &DMatrix<f64>,
    n_small: usize,
    n_large: usize,
) -> Result<f64> {
    if n_small > n_large {
        return Err(Error::InvalidConfig(format!(
            "probe needs n_small <= n_large, got {n_small} > {n_large}"
        )));
    }
    let e_large = output_energy(&config.with_n(n_large), q_m)?;
    if n_small == n_large {
        return Ok(0.0);
    }
    let e_small = output_energy(&config.with_n(n_small), q_m)?;
    Ok((e_small - e_large).abs() / e_large)
}
