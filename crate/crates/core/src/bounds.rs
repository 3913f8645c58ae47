//! Mixed Gramian and the output-error bounds for BT and SPA reduced models.

use nalgebra::{DMatrix, DVector};

use crate::balancing::{a22_solve, reduce, BalancedRealization, Method, ReducedModel};
use crate::error::{dim_check, Error, Result};
use crate::gramians::{check_covariance, input_weight, StableSchur};
use crate::system::StateSpaceSystem;

/// Radicands down to `-RADICAND_CLIP_REL * (tr(C P Cᵀ) + 1)` are clipped to zero.
pub const RADICAND_CLIP_REL: f64 = 1e-10;

fn check_io(full: &StateSpaceSystem, rom: &StateSpaceSystem) -> Result<()> {
    dim_check(full.m() == rom.m() && full.p() == rom.p(), || {
        format!(
            "full system has (m, p) = ({}, {}), reduced has ({}, {})",
            full.m(),
            full.p(),
            rom.m(),
            rom.p()
        )
    })
}

fn clipped_sqrt(radicand: f64, scale: f64) -> Result<f64> {
    let threshold = RADICAND_CLIP_REL * (scale + 1.0);
    if !radicand.is_finite() {
        return Err(Error::NonFinite("error bound radicand"));
    }
    if radicand < -threshold {
        return Err(Error::NegativeRadicand {
            value: radicand,
            threshold,
        });
    }
    Ok(radicand.max(0.0).sqrt())
}

/// `tr(X Y Xᵀ)` without forming the product.
fn trace_sandwich(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (x * y).component_mul(x).sum()
}

/// `P_g` with `A P_g + P_g A_rᵀ + B q_m B_rᵀ = 0`.
pub fn mixed_gramian(
    full: &StateSpaceSystem,
    rom: &StateSpaceSystem,
    q_m: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_io(full, rom)?;
    check_covariance(q_m, full.m())?;
    let sa = StableSchur::new(&full.a)?;
    let sr = StableSchur::new(&rom.a)?;
    sa.solve_sylvester(&sr, &(&full.b * q_m * rom.b.transpose()))
}

/// Full-system data reused across many reduced models: the Schur form of `A`, the
/// Gramian `P` and `tr(C P Cᵀ)`.
#[derive(Debug, Clone)]
pub struct BoundContext {
    pub full: StateSpaceSystem,
    pub q_m: DMatrix<f64>,
    schur: StableSchur,
    pub p: DMatrix<f64>,
    pub output_energy: f64,
}

impl BoundContext {
    pub fn new(full: &StateSpaceSystem, q_m: &DMatrix<f64>) -> Result<Self> {
        let schur = StableSchur::new(&full.a)?;
        Self::with_schur(full, q_m, schur)
    }

    fn with_schur(full: &StateSpaceSystem, q_m: &DMatrix<f64>, schur: StableSchur) -> Result<Self> {
        let w = input_weight(full, q_m)?;
        let p = schur.solve_lyapunov(&w)?;
        let output_energy = trace_sandwich(&full.c, &p);
        Ok(Self {
            full: full.clone(),
            q_m: q_m.clone(),
            schur,
            p,
            output_energy,
        })
    }

    pub fn mixed_gramian(&self, rom: &StateSpaceSystem) -> Result<DMatrix<f64>> {
        check_io(&self.full, rom)?;
        let sr = StableSchur::new(&rom.a)?;
        self.schur
            .solve_sylvester(&sr, &(&self.full.b * &self.q_m * rom.b.transpose()))
    }

    /// General bound given a precomputed mixed Gramian.
    pub fn general_with(&self, rom: &StateSpaceSystem, p_g: &DMatrix<f64>) -> Result<f64> {
        let rs = StableSchur::new(&rom.a)?;
        let p_r = rs.solve_lyapunov(&input_weight(rom, &self.q_m)?)?;
        let cross = (&self.full.c * p_g).component_mul(&rom.c).sum();
        let radicand = self.output_energy + trace_sandwich(&rom.c, &p_r) - 2.0 * cross;
        clipped_sqrt(radicand, self.output_energy)
    }

    /// `√(tr(C P Cᵀ) + tr(C_r P_r C_rᵀ) - 2 tr(C P_g C_rᵀ))`.
    pub fn general(&self, rom: &StateSpaceSystem) -> Result<f64> {
        let p_g = self.mixed_gramian(rom)?;
        self.general_with(rom, &p_g)
    }
}

/// Output-error bound in the general form.
pub fn general_bound(
    full: &StateSpaceSystem,
    rom: &StateSpaceSystem,
    q_m: &DMatrix<f64>,
) -> Result<f64> {
    BoundContext::new(full, q_m)?.general(rom)
}

/// Closed-form bound from the balanced blocks, given `T P_g`.
fn theorem_radicand(
    bal: &BalancedRealization,
    method: Method,
    r: usize,
    q_m: &DMatrix<f64>,
    p_g_rot: &DMatrix<f64>,
) -> Result<f64> {
    let part = bal.partition(r)?;
    let k = bal.n() - r;
    let pg1 = p_g_rot.rows(0, r);
    let pg2 = p_g_rot.rows(r, k);
    let b2qb2 = &part.b2 * q_m * part.b2.transpose();
    let m = match method {
        Method::Bt => b2qb2 + (pg2 * part.a21.transpose()) * 2.0,
        Method::Spa => {
            let (x, _) = a22_solve(&part)?;
            b2qb2 - (&part.a22 * pg2 + &part.a21 * pg1) * x.transpose() * 2.0
        }
    };
    Ok(weighted_trace(&part.sigma2, &m))
}

/// `tr(diag(s) M)`.
fn weighted_trace(s: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    s.iter().enumerate().map(|(i, si)| si * m[(i, i)]).sum()
}

fn balanced_output_energy(bal: &BalancedRealization) -> f64 {
    let c = &bal.c_bal;
    (0..bal.n())
        .map(|j| bal.hsv[j] * c.column(j).norm_squared())
        .sum()
}

fn theorem_bound(
    bal: &BalancedRealization,
    method: Method,
    r: usize,
    q_m: &DMatrix<f64>,
) -> Result<f64> {
    check_covariance(q_m, bal.system.m())?;
    let rom = reduce(bal, method, r)?;
    let sr = StableSchur::new(&rom.system.a)?;
    let p_g = bal
        .drift_schur()?
        .solve_sylvester(&sr, &(&bal.system.b * q_m * rom.system.b.transpose()))?;
    let radicand = theorem_radicand(bal, method, r, q_m, &(&bal.t_fwd * p_g))?;
    clipped_sqrt(radicand, balanced_output_energy(bal))
}

/// `√tr(Σ₂(B₂ q_m B₂ᵀ + 2 P_{g,2} A₂₁ᵀ))`.
pub fn bt_bound(bal: &BalancedRealization, r: usize, q_m: &DMatrix<f64>) -> Result<f64> {
    theorem_bound(bal, Method::Bt, r, q_m)
}

/// `√tr(Σ₂(B₂ q_m B₂ᵀ - 2(A₂₂ P_{g,2} + A₂₁ P_{g,1})(A₂₂⁻¹ A₂₁)ᵀ))`.
pub fn spa_bound(bal: &BalancedRealization, r: usize, q_m: &DMatrix<f64>) -> Result<f64> {
    theorem_bound(bal, Method::Spa, r, q_m)
}

/// Both bound formulas for one reduced model, sharing the mixed Gramian.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub method: Method,
    pub r: usize,
    pub eps_general: f64,
    pub eps_theorem: f64,
    pub p_g: DMatrix<f64>,
    /// `T P_g`; rows `0..r` are `P_{g,1}`, the rest `P_{g,2}`.
    pub p_g_rot: DMatrix<f64>,
}

impl BoundReport {
    /// `|eps_general - eps_theorem| / max(1, eps_general)`.
    pub fn discrepancy(&self) -> f64 {
        (self.eps_general - self.eps_theorem).abs() / self.eps_general.max(1.0)
    }

    pub fn relative_discrepancy(&self) -> f64 {
        let d = (self.eps_general - self.eps_theorem).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.eps_general.abs().max(self.eps_theorem.abs())
        }
    }
}

/// Computes the reduced model and both bounds. `ctx` must be built from `bal.system`.
pub fn bound_report(
    ctx: &BoundContext,
    bal: &BalancedRealization,
    method: Method,
    r: usize,
) -> Result<(ReducedModel, BoundReport)> {
    dim_check(ctx.full.n() == bal.n(), || {
        format!(
            "context has order {}, realization {}",
            ctx.full.n(),
            bal.n()
        )
    })?;
    let rom = reduce(bal, method, r)?;
    let p_g = ctx.mixed_gramian(&rom.system)?;
    let eps_general = ctx.general_with(&rom.system, &p_g)?;
    let p_g_rot = &bal.t_fwd * &p_g;
    let radicand = theorem_radicand(bal, method, r, &ctx.q_m, &p_g_rot)?;
    let eps_theorem = clipped_sqrt(radicand, ctx.output_energy)?;
    Ok((
        rom,
        BoundReport {
            method,
            r,
            eps_general,
            eps_theorem,
            p_g,
            p_g_rot,
        },
    ))
}

impl BalancedRealization {
    /// A bound context sharing this realization's Schur form.
    pub fn bound_context(&self, q_m: &DMatrix<f64>) -> Result<BoundContext> {
        BoundContext::with_schur(&self.system, q_m, self.drift_schur()?.clone())
    }
}
