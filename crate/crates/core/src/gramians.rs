//! Lyapunov and Sylvester solvers and the reachability/observability Gramians built on them.

use nalgebra::DMatrix;

use crate::error::{dim_check, Error, Result};
use crate::linalg::{
    check_finite, check_symmetric, default_rank_tol, solve_small, spectral_norm, symmetrize,
    PsdEigen, RealSchur,
};
use crate::system::StateSpaceSystem;

/// Stability margin: the spectral abscissa must lie below `-STABILITY_REL * ||A||_2`.
pub const STABILITY_REL: f64 = 1e-12;

/// Real Schur form of a matrix already checked for asymptotic stability.
///
/// Reusable across several right-hand sides, which is how the Gramian and bound routines
/// avoid refactorising the same drift matrix.
#[derive(Debug, Clone)]
pub struct StableSchur {
    schur: RealSchur,
    abscissa: f64,
    norm: f64,
}

impl StableSchur {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        dim_check(a.is_square(), || {
            format!("drift must be square, got {}x{}", a.nrows(), a.ncols())
        })?;
        check_finite(a, "drift matrix")?;
        let schur = RealSchur::new(a)?;
        let abscissa = schur
            .eigenvalues()
            .iter()
            .map(|e| e.0)
            .fold(f64::NEG_INFINITY, f64::max);
        let norm = spectral_norm(a);
        let threshold = -STABILITY_REL * norm;
        if !(abscissa < threshold) {
            return Err(Error::NotStable {
                abscissa,
                threshold,
            });
        }
        Ok(Self {
            schur,
            abscissa,
            norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.schur.dim()
    }

    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn schur(&self) -> &RealSchur {
        &self.schur
    }

    /// Solves `A X + X Fᵀ + W = 0` where `self` holds `A` and `other` holds `F`.
    pub fn solve_sylvester(&self, other: &StableSchur, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (n, r) = (self.dim(), other.dim());
        dim_check(w.shape() == (n, r), || {
            format!(
                "right-hand side is {}x{}, expected {n}x{r}",
                w.nrows(),
                w.ncols()
            )
        })?;
        check_finite(w, "Sylvester right-hand side")?;
        let c = other.schur.mul_q(&self.schur.qt_mul(w));
        let y = quasi_triangular_sylvester(&self.schur, &other.schur, -c)?;
        let x = other.schur.mul_qt(&self.schur.q_mul(&y));
        check_finite(&x, "Sylvester solution")?;
        Ok(x)
    }

    /// Solves `A X + X Aᵀ + W = 0` for symmetric `W`; the result is symmetrised.
    pub fn solve_lyapunov(&self, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_symmetric(w, "Lyapunov right-hand side")?;
        let n = self.dim();
        dim_check(w.nrows() == n, || {
            format!(
                "right-hand side is {}x{}, expected {n}x{n}",
                w.nrows(),
                w.ncols()
            )
        })?;
        let c = self.schur.mul_q(&self.schur.qt_mul(w));
        let y = quasi_triangular_sylvester(&self.schur, &self.schur, -c)?;
        let x = self.schur.mul_qt(&self.schur.q_mul(&y));
        check_finite(&x, "Lyapunov solution")?;
        Ok(symmetrize(&x))
    }
}

/// Last column holding a nonzero entry in each row (at least the row index itself).
fn row_extents(t: &DMatrix<f64>) -> Vec<usize> {
    let n = t.nrows();
    (0..n)
        .map(|i| (i..n).rev().find(|&j| t[(i, j)] != 0.0).unwrap_or(i).max(i))
        .collect()
}

/// Solves `T Y + Y Gᵀ = R` for quasi-upper-triangular `T`, `G`; `rhs` is overwritten.
fn quasi_triangular_sylvester(
    st: &RealSchur,
    sg: &RealSchur,
    rhs: DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let t = &st.t;
    let g = &sg.t;
    let tt = t.transpose();
    let t_ext = row_extents(t);
    let g_ext = row_extents(g);
    let mut y = rhs;

    let mut kron = [0.0f64; 16];
    let mut b = [0.0f64; 4];
    for &(j0, js) in sg.partition.blocks.iter().rev() {
        let j1 = j0 + js;
        let lend = g_ext[j0..j1].iter().max().copied().unwrap_or(j0) + 1;
        if lend > j1 {
            let upd = y.columns(j1, lend - j1) * g.view((j0, j1), (js, lend - j1)).transpose();
            let mut yj = y.columns_mut(j0, js);
            yj -= upd;
        }

        for &(i0, is) in st.partition.blocks.iter().rev() {
            let i1 = i0 + is;
            let kend = t_ext[i0..i1].iter().max().copied().unwrap_or(i0) + 1;
            let k = is * js;
            for jj in 0..js {
                for ii in 0..is {
                    let mut s = y[(i0 + ii, j0 + jj)];
                    if kend > i1 {
                        let trow = tt.view((i1, i0 + ii), (kend - i1, 1));
                        let ycol = y.view((i1, j0 + jj), (kend - i1, 1));
                        s -= trow.dot(&ycol);
                    }
                    b[ii + is * jj] = s;
                }
            }
            kron[..k * k].iter_mut().for_each(|v| *v = 0.0);
            for bb in 0..js {
                for a in 0..is {
                    let row = a + is * bb;
                    for c in 0..is {
                        kron[row * k + c + is * bb] += t[(i0 + a, i0 + c)];
                    }
                    for d in 0..js {
                        kron[row * k + a + is * d] += g[(j0 + bb, j0 + d)];
                    }
                }
            }
            if !solve_small(&mut kron[..k * k], &mut b[..k], k) {
                return Err(Error::EigFailure(format!(
                    "singular diagonal block system at ({i0}, {j0})"
                )));
            }
            for jj in 0..js {
                for ii in 0..is {
                    y[(i0 + ii, j0 + jj)] = b[ii + is * jj];
                }
            }
        }
    }
    Ok(y)
}

/// Solves `a X + X aᵀ + w = 0`.
pub fn solve_lyapunov(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(w, "Lyapunov right-hand side")?;
    dim_check(w.nrows() == a.nrows(), || {
        format!(
            "w is {}x{}, a is {}x{}",
            w.nrows(),
            w.ncols(),
            a.nrows(),
            a.ncols()
        )
    })?;
    StableSchur::new(a)?.solve_lyapunov(w)
}

/// Solves `a X + X fᵀ + w = 0`.
pub fn solve_sylvester(
    a: &DMatrix<f64>,
    f: &DMatrix<f64>,
    w: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    dim_check(w.shape() == (a.nrows(), f.nrows()), || {
        format!(
            "w is {}x{}, expected {}x{}",
            w.nrows(),
            w.ncols(),
            a.nrows(),
            f.nrows()
        )
    })?;
    let sa = StableSchur::new(a)?;
    let sf = StableSchur::new(f)?;
    sa.solve_sylvester(&sf, w)
}

pub(crate) fn check_covariance(q_m: &DMatrix<f64>, m: usize) -> Result<()> {
    dim_check(q_m.shape() == (m, m), || {
        format!("q_m is {}x{}, expected {m}x{m}", q_m.nrows(), q_m.ncols())
    })?;
    PsdEigen::new(q_m, "q_m").map(|_| ())
}

/// Noise-weighted input term `B q_m Bᵀ`.
pub fn input_weight(sys: &StateSpaceSystem, q_m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_covariance(q_m, sys.m())?;
    Ok(symmetrize(&(&sys.b * q_m * sys.b.transpose())))
}

/// `P` with `A P + P Aᵀ + B q_m Bᵀ = 0`. With `q_m = I` this is the deterministic Gramian.
pub fn reachability_gramian(sys: &StateSpaceSystem, q_m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let w = input_weight(sys, q_m)?;
    StableSchur::new(&sys.a)?.solve_lyapunov(&w)
}

/// `Q` with `Aᵀ Q + Q A + Cᵀ C = 0`.
pub fn observability_gramian(sys: &StateSpaceSystem) -> Result<DMatrix<f64>> {
    let w = symmetrize(&(sys.c.transpose() * &sys.c));
    StableSchur::new(&sys.a.transpose())?.solve_lyapunov(&w)
}

/// Reachability, observability and (optionally) deterministic Gramians of one system.
#[derive(Debug, Clone)]
pub struct GramianSet {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub p_det: Option<DMatrix<f64>>,
}

impl GramianSet {
    pub fn compute(sys: &StateSpaceSystem, q_m: &DMatrix<f64>, with_det: bool) -> Result<Self> {
        let w = input_weight(sys, q_m)?;
        let sa = StableSchur::new(&sys.a)?;
        let p = sa.solve_lyapunov(&w)?;
        let p_det = if with_det {
            let wd = symmetrize(&(&sys.b * sys.b.transpose()));
            Some(sa.solve_lyapunov(&wd)?)
        } else {
            None
        };
        let q = observability_gramian(sys)?;
        Ok(Self { p, q, p_det })
    }
}

/// Reachability Gramian over a finite horizon.
#[derive(Debug, Clone)]
pub struct FiniteTimeGramian {
    pub t: f64,
    pub value: DMatrix<f64>,
}

/// Largest admissible `h * ||A||_2` for the finite-time integration.
pub const FINITE_TIME_MAX_STEP: f64 = 0.1;

/// Integrates `X' = A X + X Aᵀ + B q_m Bᵀ`, `X(0) = 0`, up to `t` with `steps` classical
/// Runge-Kutta steps.
pub fn finite_time_gramian(
    sys: &StateSpaceSystem,
    q_m: &DMatrix<f64>,
    t: f64,
    steps: usize,
) -> Result<FiniteTimeGramian> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "horizon must be finite and >= 0, got {t}"
        )));
    }
    let w = input_weight(sys, q_m)?;
    let n = sys.n();
    if t == 0.0 {
        return Ok(FiniteTimeGramian {
            t,
            value: DMatrix::zeros(n, n),
        });
    }
    if steps == 0 {
        return Err(Error::InvalidConfig("steps must be positive".into()));
    }
    let h = t / steps as f64;
    let product = h * spectral_norm(&sys.a);
    if product >= FINITE_TIME_MAX_STEP {
        return Err(Error::StepTooLarge { h, product });
    }
    let a = &sys.a;
    let rhs = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let ax = a * x;
        &ax + ax.transpose() + &w
    };
    let mut x = DMatrix::zeros(n, n);
    for _ in 0..steps {
        let k1 = rhs(&x);
        let k2 = rhs(&(&x + &k1 * (0.5 * h)));
        let k3 = rhs(&(&x + &k2 * (0.5 * h)));
        let k4 = rhs(&(&x + &k3 * h));
        x += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    }
    check_finite(&x, "finite-time Gramian")?;
    Ok(FiniteTimeGramian {
        t,
        value: symmetrize(&x),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageRelation {
    Equal,
    XSubsetY,
    YSubsetX,
    Incomparable,
}

/// Sine of the largest principal angle accepted as "contained".
pub const IMAGE_ANGLE_TOL: f64 = 1e-6;

/// Compares the column spaces of two PSD matrices, each truncated at `rank_tol` times its
/// largest eigenvalue.
pub fn image_relation(x: &DMatrix<f64>, y: &DMatrix<f64>, rank_tol: f64) -> Result<ImageRelation> {
    image_relation_with(x, y, rank_tol, IMAGE_ANGLE_TOL)
}

pub fn image_relation_with(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    rank_tol: f64,
    angle_tol: f64,
) -> Result<ImageRelation> {
    dim_check(x.shape() == y.shape(), || {
        format!("shapes differ: {:?} vs {:?}", x.shape(), y.shape())
    })?;
    let ux = PsdEigen::new(x, "x")?.range_basis(rank_tol);
    let uy = PsdEigen::new(y, "y")?.range_basis(rank_tol);
    let x_in_y = contained(&ux, &uy, angle_tol);
    let y_in_x = contained(&uy, &ux, angle_tol);
    Ok(match (x_in_y, y_in_x) {
        (true, true) => ImageRelation::Equal,
        (true, false) => ImageRelation::XSubsetY,
        (false, true) => ImageRelation::YSubsetX,
        (false, false) => ImageRelation::Incomparable,
    })
}

/// Whether `span(u) ⊆ span(v)` for orthonormal bases `u`, `v`.
fn contained(u: &DMatrix<f64>, v: &DMatrix<f64>, angle_tol: f64) -> bool {
    if u.ncols() == 0 {
        return true;
    }
    if v.ncols() < u.ncols() {
        return false;
    }
    let resid = u - v * v.tr_mul(u);
    spectral_norm(&resid) <= angle_tol
}

/// Numerical rank at the default relative tolerance.
pub fn numerical_rank(x: &DMatrix<f64>) -> Result<usize> {
    Ok(PsdEigen::new(x, "x")?
        .range_basis(default_rank_tol(x.nrows()))
        .ncols())
}
