//! Balancing-based model order reduction for linear SDEs driven by additive Lévy noise.
//!
//! The pipeline is: assemble or load a [`StateSpaceSystem`], compute its Gramians,
//! balance, truncate (BT) or singularly perturb (SPA), then bound or simulate the output
//! error of the reduced model.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the checks

pub mod balancing;
pub mod bounds;
pub mod error;
pub mod gramians;
pub mod linalg;
pub mod noise;
pub mod simulate;
pub mod system;
pub mod wave;

pub use balancing::{
    balance, balance_system, balance_with_tol, hankel_singular_values, reduce, reduce_bt,
    reduce_spa, spectral_abscissa, BalancedRealization, Method, Partition, ReducedModel,
};
pub use bounds::{
    bound_report, bt_bound, general_bound, mixed_gramian, spa_bound, BoundContext, BoundReport,
};
pub use error::{Error, Result};
pub use gramians::{
    finite_time_gramian, image_relation, observability_gramian, reachability_gramian,
    solve_lyapunov, solve_sylvester, FiniteTimeGramian, GramianSet, ImageRelation, StableSchur,
};
pub use noise::{covariance, sample_path, NoiseComponent, NoisePath, NoiseSampler, NoiseSpec};
pub use simulate::{
    integrate, mc_error_curves, mc_state_projection_moment, mc_sup_mean_error, simulate_ensemble,
    ErrorCurve, Integrator, McErrorEstimate, McOptions, MomentEstimate, Stepper,
    TrajectoryEnsemble,
};
pub use system::{StateSpaceSystem, SystemRecord};
pub use wave::{assemble_wave, galerkin_convergence_probe, sine_coefficient, Forcing, WaveConfig};

pub use nalgebra::{DMatrix, DVector};
