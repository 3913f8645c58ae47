#![allow(dead_code)]

pub mod checks;

use levymor::{DMatrix, StateSpaceSystem};
pub use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm_taylor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm1 = a
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0;
    while norm1 / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let scaled = a / 2f64.powi(s);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=24 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `∫₀^T e^{a s} w e^{fᵀ s} ds` by composite Simpson with `intervals` (even) subintervals.
pub fn simpson_gramian(
    a: &DMatrix<f64>,
    f: &DMatrix<f64>,
    w: &DMatrix<f64>,
    t_end: f64,
    intervals: usize,
) -> DMatrix<f64> {
    assert!(intervals.is_multiple_of(2));
    let h = t_end / intervals as f64;
    let step_a = expm_taylor(&(a * h));
    let step_ft = expm_taylor(&(f * h)).transpose();
    let mut ea = DMatrix::identity(a.nrows(), a.nrows());
    let mut eft = DMatrix::identity(f.nrows(), f.nrows());
    let mut acc = DMatrix::zeros(w.nrows(), w.ncols());
    for k in 0..=intervals {
        let weight = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += (&ea * w * &eft) * weight;
        ea = &ea * &step_a;
        eft = &step_ft * &eft;
    }
    acc * (h / 3.0)
}

/// Composite Simpson rule for a scalar integrand.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    assert!(intervals.is_multiple_of(2));
    let h = (b - a) / intervals as f64;
    let mut s = f(a) + f(b);
    for k in 1..intervals {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random orthogonal matrix from the QR factors of a Gaussian matrix.
pub fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    gaussian(rng, n, n).qr().q()
}

/// Random stable matrix, either `S - Sᵀ - G Gᵀ/n - δ I` (negative definite symmetric part)
/// or an orthogonally rotated quasi-triangular matrix with damped 2×2 blocks and a
/// non-normal upper part.
pub fn stable_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    if rng.random::<bool>() {
        let s = gaussian(rng, n, n) * 0.5;
        let g = gaussian(rng, n, n);
        let delta = 0.1 + rng.random::<f64>();
        &s - s.transpose() - &g * g.transpose() / n as f64 - DMatrix::identity(n, n) * delta
    } else {
        let mut t = DMatrix::zeros(n, n);
        let mut i = 0;
        while i < n {
            let re = -(0.1 + 2.0 * rng.random::<f64>());
            if i + 1 < n && rng.random::<bool>() {
                let im = 3.0 * rng.random::<f64>() + 0.1;
                t[(i, i)] = re;
                t[(i + 1, i + 1)] = re;
                t[(i, i + 1)] = im;
                t[(i + 1, i)] = -im;
                i += 2;
            } else {
                t[(i, i)] = re;
                i += 1;
            }
        }
        let scale = 1.0 / (n as f64).sqrt();
        for r in 0..n {
            for c in (r + 2)..n {
                t[(r, c)] = scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let q = orthogonal(rng, n);
        &q * t * q.transpose()
    }
}

pub fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> StateSpaceSystem {
    let a = stable_matrix(rng, n);
    let b = gaussian(rng, n, m);
    let c = gaussian(rng, p, n);
    StateSpaceSystem::new(a, b, c).unwrap()
}

/// `‖a X + X fᵀ + w‖_F / ((‖a‖_F + ‖f‖_F) ‖X‖_F + ‖w‖_F)`.
pub fn sylvester_residual(
    a: &DMatrix<f64>,
    f: &DMatrix<f64>,
    w: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> f64 {
    let r = a * x + x * f.transpose() + w;
    r.norm() / ((a.norm() + f.norm()) * x.norm() + w.norm())
}

/// The balanced 3×3 example with `B = Cᵀ = (4, 2, 1)ᵀ`, whose Gramians are `diag(4, 2, 1)`.
pub fn example3() -> StateSpaceSystem {
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[
            -2.0,
            -4.0 / 3.0,
            -0.8,
            -4.0 / 3.0,
            -1.0,
            -2.0 / 3.0,
            -0.8,
            -2.0 / 3.0,
            -0.5,
        ],
    );
    let b = DMatrix::from_column_slice(3, 1, &[4.0, 2.0, 1.0]);
    StateSpaceSystem::new(a, b.clone(), b.transpose()).unwrap()
}

pub fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(f64::MIN_POSITIVE)
}
