use thiserror::Error;

/// Errors raised by the reduction, bound and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(
        "matrix is not asymptotically stable: spectral abscissa {abscissa:e} >= {threshold:e}"
    )]
    NotStable { abscissa: f64, threshold: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{what} is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { what: &'static str, asymmetry: f64 },

    #[error("{what} is not positive semidefinite: eigenvalue {eigenvalue:e} below -{threshold:e}")]
    NotPsd {
        what: &'static str,
        eigenvalue: f64,
        threshold: f64,
    },

    #[error(
        "{what} is not positive definite: smallest eigenvalue {eigenvalue:e} <= {threshold:e}"
    )]
    NotPd {
        what: &'static str,
        eigenvalue: f64,
        threshold: f64,
    },

    #[error("Hankel singular value sigma_{index} = {value:e} is numerically zero (sigma_1 = {largest:e})")]
    NearSingularHsv {
        index: usize,
        value: f64,
        largest: f64,
    },

    #[error("Hankel singular values tie at the cut: sigma_{r} = {upper:e}, sigma_{next} = {lower:e}", next = r + 1)]
    HsvTie { r: usize, upper: f64, lower: f64 },

    #[error("reduced order {r} is not admissible for a system of order {n} (need 1 <= r < n)")]
    BadOrder { r: usize, n: usize },

    #[error("error bound radicand {value:e} is below the clipping threshold -{threshold:e}")]
    NegativeRadicand { value: f64, threshold: f64 },

    #[error("step size {h:e} too large: h * ||A||_2 = {product:e} must stay below 0.1")]
    StepTooLarge { h: f64, product: f64 },

    #[error("quadrature resolution {nodes} too low for mode {mode} (need at least {required})")]
    ResolutionTooLow {
        nodes: usize,
        mode: usize,
        required: usize,
    },

    #[error("Euler-Maruyama step dt = {dt:e} is unstable: max |1 + dt*mu| = {growth}")]
    UnstableStep { dt: f64, growth: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid noise model: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("eigenvalue iteration failed: {0}")]
    EigFailure(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotStable { .. } => "NotStable",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::NotPsd { .. } => "NotPSD",
            Error::NotPd { .. } => "NotPD",
            Error::NearSingularHsv { .. } => "NearSingularHSV",
            Error::HsvTie { .. } => "HsvTie",
            Error::BadOrder { .. } => "BadOrder",
            Error::NegativeRadicand { .. } => "NegativeRadicand",
            Error::StepTooLarge { .. } => "StepTooLarge",
            Error::ResolutionTooLow { .. } => "ResolutionTooLow",
            Error::UnstableStep { .. } => "UnstableStep",
            Error::NonFinite(_) => "NonFinite",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::EigFailure(_) => "EigFailure",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(msg()))
    }
}
