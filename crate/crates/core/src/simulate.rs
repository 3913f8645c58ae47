//! Time stepping of linear SDEs on sampled noise paths and Monte Carlo error estimates.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::linalg::RealSchur;
use crate::noise::{NoisePath, NoiseSampler, NoiseSpec};
use crate::system::StateSpaceSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// `x ← x + dt A x + B ΔM`
    EulerMaruyama,
    /// `x ← e^{A dt} x + B ΔM`
    ExpEuler,
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler_maruyama" | "em" => Ok(Integrator::EulerMaruyama),
            "exp_euler" => Ok(Integrator::ExpEuler),
            other => Err(Error::InvalidConfig(format!(
                "unknown integrator '{other}' (expected euler_maruyama or exp_euler)"
            ))),
        }
    }
}

/// Diagonal blocks `(start, size)` if `a` is block diagonal with 1×1 and 2×2 blocks.
pub fn block_diagonal_partition(a: &DMatrix<f64>) -> Option<Vec<(usize, usize)>> {
    let n = a.nrows();
    if a.ncols() != n {
        return None;
    }
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        let size = if i + 1 < n && (a[(i + 1, i)] != 0.0 || a[(i, i + 1)] != 0.0) {
            2
        } else {
            1
        };
        blocks.push((i, size));
        i += size;
    }
    for &(s, size) in &blocks {
        for j in 0..n {
            if j >= s && j < s + size {
                continue;
            }
            for r in s..s + size {
                if a[(r, j)] != 0.0 {
                    return None;
                }
            }
        }
    }
    Some(blocks)
}

/// `exp([[a, b], [c, d]])` in closed form.
pub fn expm_2x2(a: f64, b: f64, c: f64, d: f64) -> [f64; 4] {
    let mu = 0.5 * (a + d);
    let h = 0.5 * (a - d);
    let q = h * h + b * c;
    let (ch, sh) = if q > 0.0 {
        let s = q.sqrt();
        (
            s.cosh(),
            if s < 1e-4 {
                1.0 + q / 6.0
            } else {
                s.sinh() / s
            },
        )
    } else if q < 0.0 {
        let w = (-q).sqrt();
        (w.cos(), if w < 1e-4 { 1.0 + q / 6.0 } else { w.sin() / w })
    } else {
        (1.0, 1.0)
    };
    let e = mu.exp();
    [e * (ch + sh * h), e * sh * b, e * sh * c, e * (ch - sh * h)]
}

/// One-step propagator `x ← M x`.
#[derive(Debug, Clone)]
enum Propagator {
    Dense(DMatrix<f64>),
    /// `(start, size, row-major block)`
    Blocks(Vec<(usize, usize, [f64; 4])>),
}

impl Propagator {
    fn build(a: &DMatrix<f64>, dt: f64, method: Integrator) -> Result<Self> {
        let n = a.nrows();
        if method == Integrator::EulerMaruyama {
            let growth = RealSchur::new(a)?
                .eigenvalues()
                .iter()
                .map(|&(re, im)| ((1.0 + dt * re).powi(2) + (dt * im).powi(2)).sqrt())
                .fold(0.0, f64::max);
            if growth >= 1.0 {
                return Err(Error::UnstableStep { dt, growth });
            }
        }
        if let Some(blocks) = block_diagonal_partition(a) {
            let data = blocks
                .into_iter()
                .map(|(s, size)| {
                    let m = if size == 1 {
                        let v = a[(s, s)];
                        match method {
                            Integrator::EulerMaruyama => [1.0 + dt * v, 0.0, 0.0, 0.0],
                            Integrator::ExpEuler => [(dt * v).exp(), 0.0, 0.0, 0.0],
                        }
                    } else {
                        let (p, q, r, t) =
                            (a[(s, s)], a[(s, s + 1)], a[(s + 1, s)], a[(s + 1, s + 1)]);
                        match method {
                            Integrator::EulerMaruyama => {
                                [1.0 + dt * p, dt * q, dt * r, 1.0 + dt * t]
                            }
                            Integrator::ExpEuler => expm_2x2(dt * p, dt * q, dt * r, dt * t),
                        }
                    };
                    (s, size, m)
                })
                .collect();
            return Ok(Propagator::Blocks(data));
        }
        Ok(Propagator::Dense(match method {
            Integrator::EulerMaruyama => DMatrix::identity(n, n) + a * dt,
            Integrator::ExpEuler => (a * dt).exp(),
        }))
    }

    fn apply(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        match self {
            Propagator::Dense(m) => m.mul_to(x, out),
            Propagator::Blocks(blocks) => {
                for &(s, size, m) in blocks {
                    if size == 1 {
                        out[s] = m[0] * x[s];
                    } else {
                        let (u, v) = (x[s], x[s + 1]);
                        out[s] = m[0] * u + m[1] * v;
                        out[s + 1] = m[2] * u + m[3] * v;
                    }
                }
            }
        }
    }
}

/// A system prepared for repeated integration at a fixed step size.
#[derive(Debug, Clone)]
pub struct Stepper {
    prop: Propagator,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    pub dt: f64,
    pub method: Integrator,
}

impl Stepper {
    pub fn new(sys: &StateSpaceSystem, dt: f64, method: Integrator) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step size must be > 0, got {dt}"
            )));
        }
        Ok(Self {
            prop: Propagator::build(&sys.a, dt, method)?,
            b: sys.b.clone(),
            c: sys.c.clone(),
            dt,
            method,
        })
    }

    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    /// Outputs `y_k = C x_k` for `k = 0..=steps` as a `p × (steps + 1)` matrix.
    pub fn run(&self, path: &NoisePath, x0: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.n();
        dim_check(x0.len() == n, || {
            format!("x0 has length {}, expected {n}", x0.len())
        })?;
        dim_check(path.increments.nrows() == self.b.ncols(), || {
            format!(
                "noise has {} components, system has {} inputs",
                path.increments.nrows(),
                self.b.ncols()
            )
        })?;
        if (path.dt - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::InvalidConfig(format!(
                "noise step {} differs from integrator step {}",
                path.dt, self.dt
            )));
        }
        let steps = path.steps();
        let p = self.c.nrows();
        let mut y = DMatrix::zeros(p, steps + 1);
        let mut x = x0.clone();
        let mut next = DVector::zeros(n);
        y.set_column(0, &(&self.c * &x));
        for k in 0..steps {
            self.prop.apply(&x, &mut next);
            next.gemv(1.0, &self.b, &path.increments.column(k), 1.0);
            std::mem::swap(&mut x, &mut next);
            let mut col = y.column_mut(k + 1);
            col.gemv(1.0, &self.c, &x, 0.0);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("simulated output"));
        }
        Ok(y)
    }
}

/// Integrates `sys` along `path` from `x0`; returns the `p × (steps + 1)` output trajectory.
pub fn integrate(
    sys: &StateSpaceSystem,
    path: &NoisePath,
    x0: &DVector<f64>,
    method: Integrator,
) -> Result<DMatrix<f64>> {
    Stepper::new(sys, path.dt, method)?.run(path, x0)
}

/// Monte Carlo settings shared by the error and moment estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub t_end: f64,
    pub dt: f64,
    pub samples: usize,
    pub seed: u64,
    pub full_method: Integrator,
    pub rom_method: Integrator,
}

impl Default for McOptions {
    fn default() -> Self {
        let t_end = std::f64::consts::PI;
        Self {
            t_end,
            dt: t_end / 4096.0,
            samples: 1000,
            seed: 42,
            full_method: Integrator::ExpEuler,
            rom_method: Integrator::ExpEuler,
        }
    }
}

impl McOptions {
    /// Number of steps; `t_end` must be an integer multiple of `dt` up to rounding.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "need dt > 0 and T > 0, got dt = {}, T = {}",
                self.dt, self.t_end
            )));
        }
        let k = (self.t_end / self.dt).round();
        if (k * self.dt - self.t_end).abs() > 1e-9 * self.t_end || k < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "T = {} is not a multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(k as usize)
    }

    pub fn times(&self, steps: usize) -> Vec<f64> {
        (0..=steps).map(|k| k as f64 * self.dt).collect()
    }

    fn check_samples(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::InvalidConfig(format!(
                "at least 2 samples are required, got {}",
                self.samples
            )));
        }
        Ok(())
    }
}

/// Samples per sequential chunk in the deterministic reduction.
const CHUNK: usize = 8;

/// Running first and second moments per grid point.
#[derive(Debug, Clone)]
struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Moments {
    fn zeros(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            sum_sq: vec![0.0; len],
        }
    }

    fn push(&mut self, v: impl Iterator<Item = f64>) {
        for (i, x) in v.enumerate() {
            self.sum[i] += x;
            self.sum_sq[i] += x * x;
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
        }
        self
    }

    /// Pointwise mean and standard error of the mean.
    fn finish(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let nf = n as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(&s, &q)| {
                let mean = s / nf;
                let var = ((q - nf * mean * mean) / (nf - 1.0)).max(0.0);
                (mean, (var / nf).sqrt())
            })
            .unzip()
    }
}

/// Pairwise (tree) sum in index order, independent of how chunks were scheduled.
fn pairwise_merge(mut parts: Vec<Vec<Moments>>) -> Vec<Moments> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.into_iter().zip(&b).map(|(x, y)| x.merge(y)).collect()),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}

/// Runs `per_sample` for sample indices `0..samples` in parallel chunks and reduces the
/// per-grid-point moments deterministically. `per_sample` pushes one series per tracked
/// quantity and returns the noise checksum of its path.
fn mc_reduce<F>(
    samples: usize,
    series: usize,
    len: usize,
    per_sample: F,
) -> Result<(Vec<Moments>, u64)>
where
    F: Fn(u64, &mut [Moments]) -> Result<u64> + Sync,
{
    let chunks: Vec<(usize, usize)> = (0..samples)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(samples)))
        .collect();
    let parts: Vec<(Vec<Moments>, u64)> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = vec![Moments::zeros(len); series];
            let mut check = 0u64;
            for i in lo..hi {
                check = check.wrapping_add(per_sample(i as u64, &mut acc)?);
            }
            Ok((acc, check))
        })
        .collect::<Result<_>>()?;
    let checksum = parts.iter().fold(0u64, |h, p| h.wrapping_add(p.1));
    let merged = pairwise_merge(parts.into_iter().map(|p| p.0).collect());
    Ok((merged, checksum))
}

/// `sup_t E‖y(t) - y_r(t)‖` estimated by the maximum over the grid of the sample mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McErrorEstimate {
    pub sup_mean_error: f64,
    pub argmax_time: f64,
    pub std_error_at_argmax: f64,
    pub sample_count: usize,
    /// Wrapping sum over samples of the FNV-1a checksum of each noise path.
    pub noise_checksum: u64,
}

/// Pointwise mean error and its standard error on the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub times: Vec<f64>,
    pub mean_err: Vec<f64>,
    pub std_err: Vec<f64>,
    pub sample_count: usize,
    pub noise_checksum: u64,
}

impl ErrorCurve {
    pub fn estimate(&self) -> McErrorEstimate {
        let mut k = 0;
        for i in 1..self.mean_err.len() {
            if self.mean_err[i] > self.mean_err[k] {
                k = i;
            }
        }
        McErrorEstimate {
            sup_mean_error: self.mean_err[k],
            argmax_time: self.times[k],
            std_error_at_argmax: self.std_err[k],
            sample_count: self.sample_count,
            noise_checksum: self.noise_checksum,
        }
    }
}

/// Error curves of several reduced models against one full system. Sample `i` draws its
/// noise path from stream `i` and drives the full system and every reduced model with it.
pub fn mc_error_curves(
    full: &StateSpaceSystem,
    roms: &[&StateSpaceSystem],
    spec: &NoiseSpec,
    opts: &McOptions,
) -> Result<Vec<ErrorCurve>> {
    opts.check_samples()?;
    let steps = opts.steps()?;
    let sampler = NoiseSampler::new(spec)?;
    dim_check(sampler.dim() == full.m(), || {
        format!(
            "noise has {} components, system has {} inputs",
            sampler.dim(),
            full.m()
        )
    })?;
    for rom in roms {
        dim_check(rom.m() == full.m() && rom.p() == full.p(), || {
            "reduced model inputs/outputs differ from the full system".into()
        })?;
    }
    let full_stepper = Stepper::new(full, opts.dt, opts.full_method)?;
    let rom_steppers = roms
        .iter()
        .map(|r| Stepper::new(r, opts.dt, opts.rom_method))
        .collect::<Result<Vec<_>>>()?;
    let x0 = DVector::zeros(full.n());
    let x0r: Vec<DVector<f64>> = roms.iter().map(|r| DVector::zeros(r.n())).collect();

    let (moments, checksum) = mc_reduce(opts.samples, roms.len(), steps + 1, |i, acc| {
        let path = sampler.sample(opts.dt, steps, opts.seed, i)?;
        let y = full_stepper.run(&path, &x0)?;
        for (k, st) in rom_steppers.iter().enumerate() {
            let yr = st.run(&path, &x0r[k])?;
            acc[k].push((0..=steps).map(|t| (y.column(t) - yr.column(t)).norm()));
        }
        Ok(path.checksum())
    })?;

    let times = opts.times(steps);
    Ok(moments
        .iter()
        .map(|m| {
            let (mean_err, std_err) = m.finish(opts.samples);
            ErrorCurve {
                times: times.clone(),
                mean_err,
                std_err,
                sample_count: opts.samples,
                noise_checksum: checksum,
            }
        })
        .collect())
}

/// Sup-in-time mean output error between `full` and `rom`.
pub fn mc_sup_mean_error(
    full: &StateSpaceSystem,
    rom: &StateSpaceSystem,
    spec: &NoiseSpec,
    opts: &McOptions,
) -> Result<McErrorEstimate> {
    Ok(mc_error_curves(full, &[rom], spec, opts)?[0].estimate())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
    pub argmax_time: f64,
    pub sample_count: usize,
}

/// `max_t E⟨x(t), v⟩²` for zero initial state.
pub fn mc_state_projection_moment(
    sys: &StateSpaceSystem,
    spec: &NoiseSpec,
    v: &DVector<f64>,
    opts: &McOptions,
) -> Result<MomentEstimate> {
    opts.check_samples()?;
    let n = sys.n();
    dim_check(v.len() == n, || {
        format!("v has length {}, expected {n}", v.len())
    })?;
    if (v.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidConfig(format!(
            "v must be a unit vector, |v| = {}",
            v.norm()
        )));
    }
    let steps = opts.steps()?;
    let c = DMatrix::from_row_slice(1, n, v.as_slice());
    let probe = StateSpaceSystem::new(sys.a.clone(), sys.b.clone(), c)?;
    let stepper = Stepper::new(&probe, opts.dt, opts.full_method)?;
    let sampler = NoiseSampler::new(spec)?;
    let x0 = DVector::zeros(n);
    let (moments, _) = mc_reduce(opts.samples, 1, steps + 1, |i, acc| {
        let path = sampler.sample(opts.dt, steps, opts.seed, i)?;
        let y = stepper.run(&path, &x0)?;
        acc[0].push(y.row(0).iter().map(|s| s * s));
        Ok(path.checksum())
    })?;
    let (mean, se) = moments[0].finish(opts.samples);
    let mut k = 0;
    for i in 1..mean.len() {
        if mean[i] > mean[k] {
            k = i;
        }
    }
    Ok(MomentEstimate {
        value: mean[k],
        std_error: se[k],
        argmax_time: k as f64 * opts.dt,
        sample_count: opts.samples,
    })
}

/// Output trajectories of independent samples.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    /// One `p × (steps + 1)` array per sample.
    pub outputs: Vec<DMatrix<f64>>,
    pub sample_count: usize,
    pub method: Integrator,
}

/// Simulates `samples` trajectories from zero initial state, sample `i` on stream `i`.
pub fn simulate_ensemble(
    sys: &StateSpaceSystem,
    spec: &NoiseSpec,
    opts: &McOptions,
) -> Result<TrajectoryEnsemble> {
    let steps = opts.steps()?;
    let sampler = NoiseSampler::new(spec)?;
    let stepper = Stepper::new(sys, opts.dt, opts.full_method)?;
    let x0 = DVector::zeros(sys.n());
    let outputs = (0..opts.samples as u64)
        .into_par_iter()
        .map(|i| stepper.run(&sampler.sample(opts.dt, steps, opts.seed, i)?, &x0))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryEnsemble {
        times: opts.times(steps),
        outputs,
        sample_count: opts.samples,
        method: opts.full_method,
    })
}
