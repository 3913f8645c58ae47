//! Real Schur decomposition `A = Q T Qᵀ` with `Q` orthogonal and `T` quasi-upper-triangular.
//!
//! Householder reduction to Hessenberg form followed by the Francis double-shift QR
//! iteration (the EISPACK `orthes`/`hqr2` pair, stopped before eigenvector back-substitution).
//! Exceptional shifts are applied after 10 and 30 stagnant sweeps, which keeps the
//! iteration converging on matrices with highly repeated eigenvalues.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Diagonal block structure of a quasi-upper-triangular matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    /// `(start, size)` with size 1 or 2, covering `0..n` in order.
    pub blocks: Vec<(usize, usize)>,
}

impl BlockPartition {
    /// Reads the partition off the subdiagonal: a nonzero `t[i+1, i]` opens a 2×2 block.
    ///
    /// Returns `None` if `t` is not quasi-upper-triangular (nonzero entries below the
    /// subdiagonal, or two consecutive nonzero subdiagonal entries).
    pub fn detect(t: &DMatrix<f64>) -> Option<Self> {
        let n = t.nrows();
        if t.ncols() != n {
            return None;
        }
        for j in 0..n {
            for i in (j + 2)..n {
                if t[(i, j)] != 0.0 {
                    return None;
                }
            }
        }
        let mut blocks = Vec::with_capacity(n);
        let mut i = 0;
        while i < n {
            if i + 1 < n && t[(i + 1, i)] != 0.0 {
                if i + 2 < n && t[(i + 2, i + 1)] != 0.0 {
                    return None;
                }
                blocks.push((i, 2));
                i += 2;
            } else {
                blocks.push((i, 1));
                i += 1;
            }
        }
        Some(Self { blocks })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// A real Schur factorisation.
#[derive(Debug, Clone)]
pub struct RealSchur {
    /// Orthogonal factor; `None` when the input was already quasi-triangular (Q = I).
    pub q: Option<DMatrix<f64>>,
    pub t: DMatrix<f64>,
    pub partition: BlockPartition,
}

impl RealSchur {
    /// Factorises `a`, skipping the QR iteration when `a` is already quasi-upper-triangular
    /// (for instance block diagonal with 2×2 oscillator blocks).
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if let Some(partition) = BlockPartition::detect(a) {
            return Ok(Self {
                q: None,
                t: a.clone(),
                partition,
            });
        }
        let (q, t) = schur_decompose(a)?;
        let partition = BlockPartition::detect(&t)
            .ok_or_else(|| Error::EigFailure("Schur form is not quasi-triangular".into()))?;
        Ok(Self {
            q: Some(q),
            t,
            partition,
        })
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Eigenvalues as `(re, im)` pairs, read from the diagonal blocks.
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.dim());
        for &(s, size) in &self.partition.blocks {
            if size == 1 {
                out.push((self.t[(s, s)], 0.0));
            } else {
                let (l1, l2) = eig2x2(
                    self.t[(s, s)],
                    self.t[(s, s + 1)],
                    self.t[(s + 1, s)],
                    self.t[(s + 1, s + 1)],
                );
                out.push(l1);
                out.push(l2);
            }
        }
        out
    }

    /// `Qᵀ M`, or `M` when Q = I.
    pub(crate) fn qt_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.q {
            Some(q) => q.tr_mul(m),
            None => m.clone(),
        }
    }

    /// `M Q`, or `M` when Q = I.
    pub(crate) fn mul_q(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.q {
            Some(q) => m * q,
            None => m.clone(),
        }
    }

    /// `Q M`, or `M` when Q = I.
    pub(crate) fn q_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.q {
            Some(q) => q * m,
            None => m.clone(),
        }
    }

    /// `M Qᵀ`, or `M` when Q = I.
    pub(crate) fn mul_qt(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.q {
            Some(q) => m * q.transpose(),
            None => m.clone(),
        }
    }
}

/// Eigenvalues of `[[a, b], [c, d]]` as `(re, im)` pairs.
pub fn eig2x2(a: f64, b: f64, c: f64, d: f64) -> ((f64, f64), (f64, f64)) {
    let half_tr = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = half_diff * half_diff + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((half_tr + s, 0.0), (half_tr - s, 0.0))
    } else {
        let s = (-disc).sqrt();
        ((half_tr, s), (half_tr, -s))
    }
}

/// Dense real Schur decomposition; returns `(Q, T)`.
pub fn schur_decompose(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "Schur decomposition needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Schur decomposition input"));
    }
    let mut h = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    if n == 0 {
        return Ok((v, h));
    }
    hessenberg(&mut h, &mut v);
    francis_qr(&mut h, &mut v)?;
    for j in 0..n {
        for i in (j + 2)..n {
            h[(i, j)] = 0.0;
        }
    }
    Ok((v, h))
}

fn hessenberg(h: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }

    // Accumulate the Householder reflections into V; the vectors live below the subdiagonal.
    for m in (1..high).rev() {
        if h[(m, m - 1)] != 0.0 {
            for i in (m + 1)..=high {
                ort[i] = h[(i, m - 1)];
            }
            for j in m..=high {
                let mut g = 0.0;
                for i in m..=high {
                    g += ort[i] * v[(i, j)];
                }
                g = (g / ort[m]) / h[(m, m - 1)];
                for i in m..=high {
                    v[(i, j)] += g * ort[i];
                }
            }
        }
    }
    for j in 0..n {
        for i in (j + 2)..n {
            h[(i, j)] = 0.0;
        }
    }
}

const MAX_SWEEPS_PER_EIGENVALUE: usize = 200;

#[allow(clippy::many_single_char_names)]
fn francis_qr(h: &mut DMatrix<f64>, v: &mut DMatrix<f64>) -> Result<()> {
    let nn = h.nrows();
    let low = 0usize;
    let high = nn - 1;
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z): (f64, f64, f64, f64, f64);
    let (mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut n = high as isize;
    let mut iter = 0usize;
    while n >= low as isize {
        let nu = n as usize;
        // Look for a single small subdiagonal element.
        let mut l = nu;
        while l > low {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            // One root.
            h[(nu, nu)] += exshift;
            if nu > 0 {
                h[(nu, nu - 1)] = 0.0;
            }
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            // Two roots.
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(nu, nu)] += exshift;
            h[(nu - 1, nu - 1)] += exshift;
            if nu > 1 {
                h[(nu - 1, nu - 2)] = 0.0;
            }
            if q >= 0.0 {
                // Real pair: rotate the block to upper triangular form.
                z = if p >= 0.0 { p + z } else { p - z };
                x = h[(nu, nu - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in (nu - 1)..nn {
                    z = h[(nu - 1, j)];
                    h[(nu - 1, j)] = q * z + p * h[(nu, j)];
                    h[(nu, j)] = q * h[(nu, j)] - p * z;
                }
                for i in 0..=nu {
                    z = h[(i, nu - 1)];
                    h[(i, nu - 1)] = q * z + p * h[(i, nu)];
                    h[(i, nu)] = q * h[(i, nu)] - p * z;
                }
                for i in low..=high {
                    z = v[(i, nu - 1)];
                    v[(i, nu - 1)] = q * z + p * v[(i, nu)];
                    v[(i, nu)] = q * v[(i, nu)] - p * z;
                }
                h[(nu, nu - 1)] = 0.0;
            }
            n -= 2;
            iter = 0;
        } else {
            // No convergence yet.
            x = h[(nu, nu)];
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = h[(nu - 1, nu - 1)];
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            }
            if iter == 10 {
                exshift += x;
                for i in low..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            if iter > MAX_SWEEPS_PER_EIGENVALUE {
                return Err(Error::EigFailure(format!(
                    "QR iteration did not converge at index {nu} after {MAX_SWEEPS_PER_EIGENVALUE} sweeps"
                )));
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                    for i in low..=high {
                        p = x * v[(i, k)] + y * v[(i, k + 1)];
                        if notlast {
                            p += z * v[(i, k + 2)];
                            v[(i, k + 2)] -= p * r;
                        }
                        v[(i, k)] -= p;
                        v[(i, k + 1)] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(())
}
