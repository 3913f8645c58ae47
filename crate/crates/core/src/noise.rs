//! Mean-zero square-integrable Lévy noise: scaled Wiener and compound Poisson components.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::PsdEigen;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseComponent {
    /// `c W(t)` with a standard Wiener process `W`.
    ScaledWiener { scale: f64 },
    /// Compound Poisson process with rate `rate` and jumps uniform on `(-half_width, half_width)`.
    CompoundPoisson { rate: f64, half_width: f64 },
}

impl NoiseComponent {
    /// `E[M(1)²]`.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseComponent::ScaledWiener { scale } => scale * scale,
            NoiseComponent::CompoundPoisson { rate, half_width } => {
                rate * half_width * half_width / 3.0
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            NoiseComponent::ScaledWiener { scale } => {
                if scale == 0.0 || !scale.is_finite() {
                    return Err(Error::InvalidSpec(format!(
                        "Wiener scale must be finite and nonzero, got {scale}"
                    )));
                }
            }
            NoiseComponent::CompoundPoisson { rate, half_width } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "jump rate must be > 0, got {rate}"
                    )));
                }
                if !(half_width > 0.0 && half_width.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "jump half-width must be > 0, got {half_width}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Increment over a step of length `dt`.
    fn draw(&self, rng: &mut ChaCha20Rng, dt: f64) -> f64 {
        match *self {
            NoiseComponent::ScaledWiener { scale } => {
                let z: f64 = rng.sample(StandardNormal);
                scale * dt.sqrt() * z
            }
            NoiseComponent::CompoundPoisson { rate, half_width } => {
                let jumps = poisson_inversion(rng, rate * dt);
                (0..jumps)
                    .map(|_| half_width * (2.0 * rng.random::<f64>() - 1.0))
                    .sum()
            }
        }
    }
}

/// Poisson variate by sequential inversion of the CDF; intended for small means.
fn poisson_inversion(rng: &mut ChaCha20Rng, mean: f64) -> u32 {
    let u: f64 = rng.random();
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0u32;
    while u > cdf && p > 0.0 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub components: Vec<NoiseComponent>,
    /// Replaces the independent-component covariance. Increments are then `S N` with
    /// `S` the symmetric square root of this matrix and `N` the components rescaled to
    /// unit variance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance_override: Option<Vec<Vec<f64>>>,
}

impl NoiseSpec {
    pub fn independent(components: Vec<NoiseComponent>) -> Self {
        Self {
            components,
            covariance_override: None,
        }
    }

    /// `m` independent standard Wiener processes.
    pub fn wiener(m: usize) -> Self {
        Self::independent(vec![NoiseComponent::ScaledWiener { scale: 1.0 }; m])
    }

    /// `M₁ = W/√2` and a compound Poisson `M₂` with unit rate and jumps uniform on `(-√6, √6)`.
    pub fn reference() -> Self {
        Self::independent(vec![
            NoiseComponent::ScaledWiener {
                scale: std::f64::consts::FRAC_1_SQRT_2,
            },
            NoiseComponent::CompoundPoisson {
                rate: 1.0,
                half_width: 6f64.sqrt(),
            },
        ])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    fn override_matrix(&self) -> Result<Option<DMatrix<f64>>> {
        let Some(rows) = &self.covariance_override else {
            return Ok(None);
        };
        let m = self.dim();
        if rows.len() != m || rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidSpec(format!(
                "covariance override must be {m}x{m}"
            )));
        }
        let q = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
        PsdEigen::new(&q, "covariance override").map_err(|e| Error::InvalidSpec(e.to_string()))?;
        Ok(Some(q))
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidSpec(
                "noise needs at least one component".into(),
            ));
        }
        for c in &self.components {
            c.validate()?;
        }
        self.override_matrix().map(|_| ())
    }
}

/// `Q_M = E[M(1) M(1)ᵀ]`.
pub fn covariance(spec: &NoiseSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if let Some(q) = spec.override_matrix()? {
        return Ok(q);
    }
    let m = spec.dim();
    Ok(DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            spec.components[i].variance()
        } else {
            0.0
        }
    }))
}

/// Noise increments on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    /// `m × steps`; column `k` is `M((k+1) dt) - M(k dt)`.
    pub increments: DMatrix<f64>,
    pub seed: u64,
    pub stream_id: u64,
}

impl NoisePath {
    pub fn steps(&self) -> usize {
        self.increments.ncols()
    }

    /// FNV-1a hash of the increment bit patterns.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.increments.iter() {
            for byte in v.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Reusable sampler holding the validated spec and the mixing matrix of an override.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    spec: NoiseSpec,
    mixing: Option<DMatrix<f64>>,
}

impl NoiseSampler {
    pub fn new(spec: &NoiseSpec) -> Result<Self> {
        spec.validate()?;
        let mixing = match spec.override_matrix()? {
            Some(q) => {
                let s = PsdEigen::new(&q, "covariance override")?.sqrt();
                let m = spec.dim();
                let unit = DMatrix::from_fn(m, m, |i, j| {
                    if i == j {
                        1.0 / spec.components[i].variance().sqrt()
                    } else {
                        0.0
                    }
                });
                Some(s * unit)
            }
            None => None,
        };
        Ok(Self {
            spec: spec.clone(),
            mixing,
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Deterministic in `(seed, stream_id)`: the generator is ChaCha20 seeded with `seed`
    /// on stream `stream_id`.
    pub fn sample(&self, dt: f64, steps: usize, seed: u64, stream_id: u64) -> Result<NoisePath> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step size must be > 0, got {dt}"
            )));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        let m = self.dim();
        let mut inc = DMatrix::zeros(m, steps);
        for k in 0..steps {
            for (i, c) in self.spec.components.iter().enumerate() {
                inc[(i, k)] = c.draw(&mut rng, dt);
            }
        }
        if let Some(s) = &self.mixing {
            inc = s * inc;
        }
        Ok(NoisePath {
            dt,
            increments: inc,
            seed,
            stream_id,
        })
    }
}

pub fn sample_path(
    spec: &NoiseSpec,
    dt: f64,
    steps: usize,
    seed: u64,
    stream_id: u64,
) -> Result<NoisePath> {
    NoiseSampler::new(spec)?.sample(dt, steps, seed, stream_id)
}
