//! Hankel singular values, the balancing transformation and the BT / SPA reduced models.

use std::fmt;
use std::sync::OnceLock;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::gramians::{GramianSet, StableSchur};
use crate::linalg::{default_rank_tol, norm_1, svd_square, PsdEigen, RealSchur};
use crate::system::StateSpaceSystem;

/// Minimum relative gap `(σ_r - σ_{r+1}) / σ_1` at the truncation index.
pub const HSV_GAP_REL: f64 = 1e-10;
/// Condition number of `A22` above which SPA logs a warning.
pub const A22_COND_WARN: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bt,
    Spa,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bt => "bt",
            Method::Spa => "spa",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bt" => Ok(Method::Bt),
            "spa" => Ok(Method::Spa),
            other => Err(Error::InvalidConfig(format!(
                "unknown reduction method '{other}' (expected bt or spa)"
            ))),
        }
    }
}

/// Maximum real part of the eigenvalues of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    dim_check(a.is_square(), || {
        format!("matrix must be square, got {}x{}", a.nrows(), a.ncols())
    })?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigFailure("non-finite matrix entries".into()));
    }
    Ok(RealSchur::new(a)?
        .eigenvalues()
        .iter()
        .map(|e| e.0)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Hankel singular values `σ_i = √λ_i(PQ)` in descending order.
pub fn hankel_singular_values(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DVector<f64>> {
    dim_check(p.shape() == q.shape(), || {
        format!("Gramian shapes differ: {:?} vs {:?}", p.shape(), q.shape())
    })?;
    let k = PsdEigen::new(p, "P")?.sqrt();
    let l = PsdEigen::new(q, "Q")?.sqrt();
    Ok(svd_square(&(l.transpose() * k)).1)
}

/// A system together with its balancing transformation.
#[derive(Debug, Clone)]
pub struct BalancedRealization {
    /// The system in its original coordinates.
    pub system: StateSpaceSystem,
    pub t_fwd: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    pub hsv: DVector<f64>,
    pub a_bal: DMatrix<f64>,
    pub b_bal: DMatrix<f64>,
    pub c_bal: DMatrix<f64>,
    pub rank_tol: f64,
    schur: OnceLock<StableSchur>,
}

/// Split of the balanced matrices at index `r`.
#[derive(Debug, Clone)]
pub struct Partition {
    pub a11: DMatrix<f64>,
    pub a12: DMatrix<f64>,
    pub a21: DMatrix<f64>,
    pub a22: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub sigma1: DVector<f64>,
    pub sigma2: DVector<f64>,
}

impl BalancedRealization {
    pub fn n(&self) -> usize {
        self.hsv.len()
    }

    /// Balanced coordinates as a system.
    pub fn balanced_system(&self) -> StateSpaceSystem {
        StateSpaceSystem {
            a: self.a_bal.clone(),
            b: self.b_bal.clone(),
            c: self.c_bal.clone(),
        }
    }

    /// Schur form of the original drift, computed on first use.
    pub fn drift_schur(&self) -> Result<&StableSchur> {
        if let Some(s) = self.schur.get() {
            return Ok(s);
        }
        let s = StableSchur::new(&self.system.a)?;
        Ok(self.schur.get_or_init(|| s))
    }

    /// Checks `1 <= r < n` and the HSV gap at `r`.
    pub fn check_order(&self, r: usize) -> Result<()> {
        let n = self.n();
        if r == 0 || r >= n {
            return Err(Error::BadOrder { r, n });
        }
        let (upper, lower) = (self.hsv[r - 1], self.hsv[r]);
        if (upper - lower) / self.hsv[0] <= HSV_GAP_REL {
            return Err(Error::HsvTie { r, upper, lower });
        }
        Ok(())
    }

    pub fn partition(&self, r: usize) -> Result<Partition> {
        let n = self.n();
        if r == 0 || r >= n {
            return Err(Error::BadOrder { r, n });
        }
        let k = n - r;
        let a = &self.a_bal;
        Ok(Partition {
            a11: a.view((0, 0), (r, r)).into_owned(),
            a12: a.view((0, r), (r, k)).into_owned(),
            a21: a.view((r, 0), (k, r)).into_owned(),
            a22: a.view((r, r), (k, k)).into_owned(),
            b1: self.b_bal.rows(0, r).into_owned(),
            b2: self.b_bal.rows(r, k).into_owned(),
            c1: self.c_bal.columns(0, r).into_owned(),
            c2: self.c_bal.columns(r, k).into_owned(),
            sigma1: self.hsv.rows(0, r).into_owned(),
            sigma2: self.hsv.rows(r, k).into_owned(),
        })
    }
}

fn check_pd(x: &DMatrix<f64>, what: &'static str, rank_tol: f64) -> Result<PsdEigen> {
    let e = PsdEigen::new(x, what)?;
    let n = e.values.len();
    let lmax = if n > 0 { e.values[0] } else { 0.0 };
    let lmin = if n > 0 { e.values[n - 1] } else { 0.0 };
    let threshold = rank_tol * lmax;
    if !(lmin > threshold) {
        return Err(Error::NotPd {
            what,
            eigenvalue: lmin,
            threshold,
        });
    }
    Ok(e)
}

/// Balances `sys` given positive definite Gramians, at the default rank tolerance.
pub fn balance(
    sys: &StateSpaceSystem,
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<BalancedRealization> {
    balance_with_tol(sys, p, q, default_rank_tol(sys.n()))
}

/// Balances `sys` with `T = S^{-1/2} Vᵀ L`, `T⁻¹ = K U S^{-1/2}` where `P = K²`, `Q = L²`
/// and `K L = U S Vᵀ`.
pub fn balance_with_tol(
    sys: &StateSpaceSystem,
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    rank_tol: f64,
) -> Result<BalancedRealization> {
    let n = sys.n();
    dim_check(p.shape() == (n, n) && q.shape() == (n, n), || {
        format!("Gramians must be {n}x{n}")
    })?;
    let k = check_pd(p, "P", rank_tol)?.sqrt();
    let l = check_pd(q, "Q", rank_tol)?.sqrt();
    let (mut u, s, mut v) = svd_square(&(k.transpose() * &l));

    for (i, &sv) in s.iter().enumerate() {
        if sv < rank_tol * s[0] || sv == 0.0 {
            return Err(Error::NearSingularHsv {
                index: i + 1,
                value: sv,
                largest: s[0],
            });
        }
    }
    for j in 0..n {
        let col = u.column(j);
        let imax = col.iamax();
        if col[imax] < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }

    let s_isqrt = DVector::from_fn(n, |i, _| 1.0 / s[i].sqrt());
    let mut t_fwd = v.transpose() * l.transpose();
    for (i, mut row) in t_fwd.row_iter_mut().enumerate() {
        row *= s_isqrt[i];
    }
    let mut t_inv = k * u;
    for (j, mut col) in t_inv.column_iter_mut().enumerate() {
        col *= s_isqrt[j];
    }
    let a_bal = &t_fwd * &sys.a * &t_inv;
    let b_bal = &t_fwd * &sys.b;
    let c_bal = &sys.c * &t_inv;
    Ok(BalancedRealization {
        system: sys.clone(),
        t_fwd,
        t_inv,
        hsv: s,
        a_bal,
        b_bal,
        c_bal,
        rank_tol,
        schur: OnceLock::new(),
    })
}

/// Computes the Gramians of `sys` for noise covariance `q_m` and balances.
pub fn balance_system(sys: &StateSpaceSystem, q_m: &DMatrix<f64>) -> Result<BalancedRealization> {
    let g = GramianSet::compute(sys, q_m, false)?;
    balance(sys, &g.p, &g.q)
}

#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub system: StateSpaceSystem,
    pub method: Method,
    pub r: usize,
    pub parent_hsv_tail: DVector<f64>,
    /// 1-norm condition number of `A22` (SPA only).
    pub a22_cond: Option<f64>,
}

impl ReducedModel {
    pub fn ill_conditioned(&self) -> bool {
        self.a22_cond.is_some_and(|c| c > A22_COND_WARN)
    }
}

/// Balanced truncation: `(A11, B1, C1)`.
pub fn reduce_bt(bal: &BalancedRealization, r: usize) -> Result<ReducedModel> {
    bal.check_order(r)?;
    let part = bal.partition(r)?;
    Ok(ReducedModel {
        system: StateSpaceSystem {
            a: part.a11,
            b: part.b1,
            c: part.c1,
        },
        method: Method::Bt,
        r,
        parent_hsv_tail: part.sigma2,
        a22_cond: None,
    })
}

/// `A22⁻¹ A21` by pivoted LU, with the 1-norm condition number of `A22`.
pub(crate) fn a22_solve(part: &Partition) -> Result<(DMatrix<f64>, f64)> {
    let singular =
        || Error::EigFailure("A22 is singular; the balanced system is not stable".into());
    let lu = part.a22.clone().lu();
    let x = lu.solve(&part.a21).ok_or_else(singular)?;
    let inv = lu.try_inverse().ok_or_else(singular)?;
    let cond = norm_1(&part.a22) * norm_1(&inv);
    Ok((x, cond))
}

/// Singular perturbation approximation:
/// `(A11 - A12 A22⁻¹ A21, B1, C1 - C2 A22⁻¹ A21)`.
pub fn reduce_spa(bal: &BalancedRealization, r: usize) -> Result<ReducedModel> {
    bal.check_order(r)?;
    let part = bal.partition(r)?;
    let (x, cond) = a22_solve(&part)?;
    if cond > A22_COND_WARN {
        warn!("SPA at r = {r}: A22 is ill-conditioned (cond_1 = {cond:e})");
    }
    Ok(ReducedModel {
        system: StateSpaceSystem {
            a: &part.a11 - &part.a12 * &x,
            b: part.b1,
            c: &part.c1 - &part.c2 * &x,
        },
        method: Method::Spa,
        r,
        parent_hsv_tail: part.sigma2,
        a22_cond: Some(cond),
    })
}

pub fn reduce(bal: &BalancedRealization, method: Method, r: usize) -> Result<ReducedModel> {
    match method {
        Method::Bt => reduce_bt(bal, r),
        Method::Spa => reduce_spa(bal, r),
    }
}
