//! Dense linear-algebra helpers shared by the Gramian, balancing and bound routines.

pub mod schur;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub use schur::{eig2x2, schur_decompose, BlockPartition, RealSchur};

/// Eigenvalues in `[-CLIP_REL * ||X||, 0)` are treated as rounding and set to zero.
pub const CLIP_REL: f64 = 1e-10;
/// Eigenvalues below `-INDEFINITE_REL * ||X||` mean the matrix is genuinely indefinite.
pub const INDEFINITE_REL: f64 = 1e-8;
/// Relative Frobenius asymmetry accepted for inputs documented as symmetric.
pub const SYMMETRY_REL: f64 = 1e-10;

/// `(X + Xᵀ) / 2`.
pub fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

/// `||X - Xᵀ||_F / ||X||_F`, zero for the zero matrix.
pub fn asymmetry(x: &DMatrix<f64>) -> f64 {
    let nrm = x.norm();
    if nrm == 0.0 {
        return 0.0;
    }
    (x - x.transpose()).norm() / nrm
}

pub(crate) fn check_symmetric(x: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if !x.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    check_finite(x, what)?;
    let asym = asymmetry(x);
    if asym > SYMMETRY_REL {
        return Err(Error::NotSymmetric {
            what,
            asymmetry: asym,
        });
    }
    Ok(())
}

pub(crate) fn check_finite(x: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Spectral norm. Exact via SVD up to n = 300; above that a power-iteration estimate on
/// `AᵀA`, which can undershoot by ~1e-3 relative when the top singular values cluster.
/// Only used to scale tolerances.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if a.nrows().max(a.ncols()) <= 300 {
        return a.singular_values().max();
    }
    let n = a.ncols();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 1e-3 * ((i * 7919) % 101) as f64);
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..200 {
        let w = a.tr_mul(&(a * &v));
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v = w / nw;
        if (next - est).abs() <= 1e-12 * next {
            return next;
        }
        est = next;
    }
    est
}

/// Eigendecomposition of a symmetric PSD matrix with rounding-level negative eigenvalues
/// clipped to zero. Eigenvalues are sorted in descending order.
#[derive(Debug, Clone)]
pub struct PsdEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
    /// Largest eigenvalue magnitude before clipping.
    pub scale: f64,
}

impl PsdEigen {
    pub fn new(x: &DMatrix<f64>, what: &'static str) -> Result<Self> {
        check_symmetric(x, what)?;
        let n = x.nrows();
        if n == 0 {
            return Ok(Self {
                values: DVector::zeros(0),
                vectors: DMatrix::zeros(0, 0),
                scale: 0.0,
            });
        }
        let eig = SymmetricEigen::new(symmetrize(x));
        let scale = eig.eigenvalues.amax();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

        let mut values = DVector::zeros(n);
        let mut vectors = DMatrix::zeros(n, n);
        for (k, &i) in order.iter().enumerate() {
            let mut lam = eig.eigenvalues[i];
            if lam < 0.0 {
                if lam < -INDEFINITE_REL * scale {
                    return Err(Error::NotPsd {
                        what,
                        eigenvalue: lam,
                        threshold: INDEFINITE_REL * scale,
                    });
                }
                if lam < -CLIP_REL * scale {
                    warn!("{what}: clipping eigenvalue {lam:e} (scale {scale:e}) to zero");
                }
                lam = 0.0;
            }
            values[k] = lam;
            vectors.set_column(k, &eig.eigenvectors.column(i));
        }
        Ok(Self {
            values,
            vectors,
            scale,
        })
    }

    /// Symmetric square root `V diag(√λ) Vᵀ`.
    pub fn sqrt(&self) -> DMatrix<f64> {
        let mut vs = self.vectors.clone();
        for (k, mut col) in vs.column_iter_mut().enumerate() {
            col *= self.values[k].sqrt();
        }
        &vs * self.vectors.transpose()
    }

    /// Orthonormal basis of the eigenvectors with `λ > rel_tol * λ_max`.
    pub fn range_basis(&self, rel_tol: f64) -> DMatrix<f64> {
        let lmax = self.values.iter().cloned().fold(0.0, f64::max);
        let k = self
            .values
            .iter()
            .take_while(|&&l| lmax > 0.0 && l > rel_tol * lmax)
            .count();
        self.vectors.columns(0, k).into_owned()
    }
}

/// SVD `M = U diag(s) Vᵀ` of a square matrix, descending `s`.
///
/// Computed from the symmetric eigendecomposition of `[[0, M], [Mᵀ, 0]]`, whose
/// eigenpairs are `±s_i` with vectors `[u_i; ±v_i] / √2`. This keeps the backward error at
/// rounding level for strongly graded spectra, where the bidiagonal QR SVD in nalgebra
/// leaves residuals near 1e-10.
pub fn svd_square(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "svd_square needs a square matrix");
    let mut aug = DMatrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, n), (n, n)).copy_from(m);
    aug.view_mut((n, 0), (n, n)).copy_from(&m.transpose());
    let eig = SymmetricEigen::new(aug);
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let r2 = std::f64::consts::SQRT_2;
    let s = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]].max(0.0));
    let u = DMatrix::from_fn(n, n, |i, j| r2 * eig.eigenvectors[(i, order[j])]);
    let v = DMatrix::from_fn(n, n, |i, j| r2 * eig.eigenvectors[(n + i, order[j])]);
    (u, s, v)
}

/// Default relative rank tolerance `n * eps * 1e3`.
pub fn default_rank_tol(n: usize) -> f64 {
    n.max(1) as f64 * f64::EPSILON * 1e3
}

/// Solves the small dense system `m x = b` (`m` row-major `k×k`) in place by Gaussian
/// elimination with partial pivoting. Returns `false` on an exactly singular pivot.
pub(crate) fn solve_small(m: &mut [f64], b: &mut [f64], k: usize) -> bool {
    for col in 0..k {
        let mut piv = col;
        for row in (col + 1)..k {
            if m[row * k + col].abs() > m[piv * k + col].abs() {
                piv = row;
            }
        }
        if m[piv * k + col] == 0.0 {
            return false;
        }
        if piv != col {
            for j in 0..k {
                m.swap(col * k + j, piv * k + j);
            }
            b.swap(col, piv);
        }
        let d = m[col * k + col];
        for row in (col + 1)..k {
            let f = m[row * k + col] / d;
            if f != 0.0 {
                for j in col..k {
                    m[row * k + j] -= f * m[col * k + j];
                }
                b[row] -= f * b[col];
            }
        }
    }
    for row in (0..k).rev() {
        let mut s = b[row];
        for j in (row + 1)..k {
            s -= m[row * k + j] * b[j];
        }
        b[row] = s / m[row * k + row];
    }
    true
}

/// Maximum absolute column sum.
pub fn norm_1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
