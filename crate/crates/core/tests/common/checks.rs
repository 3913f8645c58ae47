//! Randomized invariant checks shared by the property suite and the acceptance run. Each
//! takes a seed and sizes and returns the measured defect; `None` marks an instance whose
//! Gramians are not positive definite, which the balancing routines reject by design.

use levymor::gramians::numerical_rank;
use levymor::linalg::default_rank_tol;
use levymor::*;

use super::*;

/// Random positive definite `m×m` noise covariance.
pub fn random_covariance(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let g = gaussian(rng, m, m);
    &g * g.transpose() / m as f64 + DMatrix::identity(m, m) * 0.1
}

/// Relative residuals `(lyapunov, sylvester)` for a random order-`n` drift and a second
/// drift of order `k`.
pub fn solver_residuals(seed: u64, n: usize, k: usize) -> (f64, f64) {
    let mut rng = rng(seed);
    let a = stable_matrix(&mut rng, n);
    let f = stable_matrix(&mut rng, k);
    let b = gaussian(&mut rng, n, 2);
    let w = &b * b.transpose();
    let x = solve_lyapunov(&a, &w).unwrap();
    let wc = &b * gaussian(&mut rng, 2, k);
    let y = solve_sylvester(&a, &f, &wc).unwrap();
    (
        sylvester_residual(&a, &a, &w, &x),
        sylvester_residual(&a, &f, &wc, &y),
    )
}

/// Largest entrywise difference between the Lyapunov and Sylvester(a, a) solutions,
/// relative to the largest entry.
pub fn lyapunov_vs_sylvester(seed: u64, n: usize) -> f64 {
    let mut rng = rng(seed);
    let a = stable_matrix(&mut rng, n);
    let b = gaussian(&mut rng, n, 3);
    let w = &b * b.transpose();
    let x = solve_lyapunov(&a, &w).unwrap();
    let y = solve_sylvester(&a, &a, &w).unwrap();
    max_rel(&y, &x)
}

/// Steps keeping `h ‖A‖₂ ≤ 0.05` (the Frobenius norm bounds the spectral norm).
pub fn finite_time_steps(a: &DMatrix<f64>, t: f64) -> usize {
    (t * a.norm() / 0.05).ceil() as usize + 1
}

/// `(vᵀP(t₁)v, vᵀP(t₂)v, vᵀPv)` for a random system and direction.
pub fn finite_time_quadratics(seed: u64, n: usize, t1: f64, t2: f64) -> [f64; 3] {
    let mut rng = rng(seed);
    let sys = random_system(&mut rng, n, 2, 1);
    let q_m = random_covariance(&mut rng, 2);
    let v = gaussian(&mut rng, n, 1).column(0).normalize();
    let quad = |x: &DMatrix<f64>| v.dot(&(x * &v));
    let p1 = finite_time_gramian(&sys, &q_m, t1, finite_time_steps(&sys.a, t1)).unwrap();
    let p2 = finite_time_gramian(&sys, &q_m, t2, finite_time_steps(&sys.a, t2)).unwrap();
    let p = reachability_gramian(&sys, &q_m).unwrap();
    [quad(&p1.value), quad(&p2.value), quad(&p)]
}

/// Outcome of one image check: the relations `im P(1)` vs `im P` and `im P` vs `im P_D`,
/// the numerical rank of `P`, and the values these should take by construction.
#[derive(Debug)]
pub struct ImageCase {
    pub finite: ImageRelation,
    pub det: ImageRelation,
    pub rank: usize,
    pub expected_det: ImageRelation,
    pub expected_rank: usize,
}

/// A rotated system with invariant blocks `R1` (fed by `k1` inputs), `R2` (fed by `k2`
/// further inputs, coupled into `R1`) and `k_hidden` unreachable states. Odd seeds use a
/// noise covariance that silences the `R2` inputs, so `im P = R1` while `im P_D = R1 ⊕ R2`.
pub fn image_relations(seed: u64, k1: usize, k2: usize, k_hidden: usize) -> ImageCase {
    let mut rng = rng(seed);
    let n = k1 + k2 + k_hidden;
    let m = k1 + k2;
    let mut a = DMatrix::zeros(n, n);
    let blocks = [(0, k1), (k1, k2), (k1 + k2, k_hidden)];
    for (i, &(s, k)) in blocks.iter().enumerate() {
        if k == 0 {
            continue;
        }
        a.view_mut((s, s), (k, k))
            .copy_from(&stable_matrix(&mut rng, k));
        for &(s2, k2) in &blocks[i + 1..] {
            a.view_mut((s, s2), (k, k2))
                .copy_from(&(gaussian(&mut rng, k, k2) * 0.3));
        }
    }
    let mut b = DMatrix::zeros(n, m);
    b.view_mut((0, 0), (k1, k1))
        .copy_from(&(gaussian(&mut rng, k1, k1) + DMatrix::identity(k1, k1) * 2.0));
    if k2 > 0 {
        b.view_mut((k1, k1), (k2, k2))
            .copy_from(&(gaussian(&mut rng, k2, k2) + DMatrix::identity(k2, k2) * 2.0));
    }
    let q = orthogonal(&mut rng, n);
    let sys = StateSpaceSystem::new(&q * a * q.transpose(), &q * b, DMatrix::zeros(1, n)).unwrap();
    let silenced = seed % 2 == 1 && k2 > 0;
    let q_m = if silenced {
        DMatrix::from_fn(m, m, |i, j| if i == j && i < k1 { 1.0 } else { 0.0 })
    } else {
        random_covariance(&mut rng, m)
    };
    let g = GramianSet::compute(&sys, &q_m, true).unwrap();
    let pt = finite_time_gramian(&sys, &q_m, 1.0, finite_time_steps(&sys.a, 1.0)).unwrap();
    let tol = default_rank_tol(n);
    ImageCase {
        finite: image_relation(&pt.value, &g.p, tol).unwrap(),
        det: image_relation(&g.p, g.p_det.as_ref().unwrap(), tol).unwrap(),
        rank: numerical_rank(&g.p).unwrap(),
        expected_det: if silenced {
            ImageRelation::XSubsetY
        } else {
            ImageRelation::Equal
        },
        expected_rank: if silenced { k1 } else { k1 + k2 },
    }
}

fn balanced(
    seed: u64,
    n: usize,
    m: usize,
    p: usize,
) -> Option<(BalancedRealization, DMatrix<f64>)> {
    let mut rng = rng(seed);
    let sys = random_system(&mut rng, n, m, p);
    let q_m = random_covariance(&mut rng, m);
    match balance_system(&sys, &q_m) {
        Ok(bal) => Some((bal, q_m)),
        Err(Error::NotPd { .. } | Error::NearSingularHsv { .. }) => None,
        Err(e) => panic!("seed {seed}: {e}"),
    }
}

/// Largest deviation of `T P Tᵀ` and `T⁻ᵀ Q T⁻¹` from `diag(σ)`, relative to `σ₁`.
pub fn balanced_defect(seed: u64, n: usize, m: usize, p: usize) -> Option<f64> {
    let (bal, q_m) = balanced(seed, n, m, p)?;
    let g = GramianSet::compute(&bal.system, &q_m, false).unwrap();
    let s = DMatrix::from_diagonal(&bal.hsv);
    let dp = (&bal.t_fwd * &g.p * bal.t_fwd.transpose() - &s).amax();
    let dq = (bal.t_inv.transpose() * &g.q * &bal.t_inv - &s).amax();
    Some(dp.max(dq) / bal.hsv[0])
}

/// Largest change of the HSVs under a random similarity with condition number at most
/// `e^{2 spread}`, relative to `σ₁`.
pub fn hsv_similarity_defect(seed: u64, n: usize, spread: f64) -> Option<f64> {
    let mut rng = rng(seed);
    let sys = random_system(&mut rng, n, 2, 2);
    let q_m = random_covariance(&mut rng, 2);
    let u = orthogonal(&mut rng, n);
    let d: Vec<f64> = (0..n)
        .map(|_| spread * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    let s = &u * DMatrix::from_fn(n, n, |i, j| if i == j { d[i].exp() } else { 0.0 });
    let s_inv =
        DMatrix::from_fn(n, n, |i, j| if i == j { (-d[i]).exp() } else { 0.0 }) * u.transpose();
    let moved = sys.transform(&s, &s_inv).unwrap();
    let h = |sys: &StateSpaceSystem| -> Option<DVector<f64>> {
        let g = GramianSet::compute(sys, &q_m, false).unwrap();
        hankel_singular_values(&g.p, &g.q).ok()
    };
    let (h0, h1) = (h(&sys)?, h(&moved)?);
    Some((&h0 - &h1).amax() / h0[0])
}

/// Number of reduced models built over every admissible order and both methods, and the
/// largest spectral abscissa among them.
pub fn rom_abscissae(seed: u64, n: usize) -> Option<(usize, f64)> {
    let (bal, _) = balanced(seed, n, 2, 2)?;
    let mut count = 0;
    let mut worst = f64::NEG_INFINITY;
    for r in 1..n {
        for method in [Method::Bt, Method::Spa] {
            match reduce(&bal, method, r) {
                Ok(rom) => {
                    count += 1;
                    worst = worst.max(spectral_abscissa(&rom.system.a).unwrap());
                }
                Err(Error::HsvTie { .. }) => {}
                Err(e) => panic!("seed {seed} r {r} {method}: {e}"),
            }
        }
    }
    Some((count, worst))
}

/// `|ε_g² - ε_t²| / tr(C P Cᵀ)` for BT and SPA at order `r`; this is the scale at which
/// the general formula cancels.
pub fn bound_identity_defect(seed: u64, n: usize, r: usize) -> Option<f64> {
    let (bal, q_m) = balanced(seed, n, 2, 2)?;
    let ctx = bal.bound_context(&q_m).unwrap();
    let mut worst: f64 = 0.0;
    for method in [Method::Bt, Method::Spa] {
        match bound_report(&ctx, &bal, method, r) {
            Ok((_, rep)) => {
                let d = (rep.eps_general.powi(2) - rep.eps_theorem.powi(2)).abs();
                worst = worst.max(d / ctx.output_energy);
            }
            Err(Error::HsvTie { .. }) => {}
            Err(e) => panic!("seed {seed} r {r} {method}: {e}"),
        }
    }
    Some(worst)
}

/// Relative deviation of the bounds after scaling `C` by `s` from `|s|` times the originals.
pub fn scale_defect(seed: u64, n: usize, r: usize, s: f64) -> Option<f64> {
    let (bal, q_m) = balanced(seed, n, 2, 2)?;
    let scaled = balance_system(&bal.system.scale_output(s), &q_m).unwrap();
    let bounds = |bal: &BalancedRealization| -> Option<[f64; 2]> {
        let bt = bt_bound(bal, r, &q_m);
        let spa = spa_bound(bal, r, &q_m);
        match (bt, spa) {
            (Ok(x), Ok(y)) => Some([x, y]),
            (Err(Error::HsvTie { .. }), _) | (_, Err(Error::HsvTie { .. })) => None,
            (Err(e), _) | (_, Err(e)) => panic!("seed {seed} r {r}: {e}"),
        }
    };
    let (b0, b1) = (bounds(&bal)?, bounds(&scaled)?);
    Some(
        b0.iter()
            .zip(&b1)
            .map(|(x, y)| (y - s.abs() * x).abs() / (s.abs() * x).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max),
    )
}
