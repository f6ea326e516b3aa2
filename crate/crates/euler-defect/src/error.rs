//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A state contained NaN or otherwise left the domain where the
    /// requested quantity is defined.
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("temperature undefined at vacuum")]
    VacuumTemperature,

    /// Reference states for relative energies must be interior points.
    #[error("reference state outside domain: {0}")]
    ReferenceOutsideDomain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("test function not compactly supported in domain")]
    SupportViolation,

    #[error("NaN encountered in {0}")]
    Nan(&'static str),

    #[error("CFL number {0} exceeds the stability bound 0.45")]
    CflViolation(f64),

    #[error("positivity lost at t = {t}: reduce CFL or raise viscosity")]
    PositivityLost { t: f64 },

    #[error("vacuum Riemann problem out of scope")]
    VacuumRiemann,

    #[error("gamma = {0} outside supported range (1, 3]")]
    UnsupportedGamma(f64),

    #[error("cannot extrapolate: {0}")]
    CannotExtrapolate(String),

    #[error("unresolvable layer: delta = {delta} below cell width {h}")]
    UnresolvableLayer { delta: f64, h: f64 },

    #[error("insufficient levels: need at least {need}, got {got}")]
    InsufficientLevels { need: usize, got: usize },

    #[error("{0} not applicable: {1}")]
    NotApplicable(&'static str, &'static str),

    #[error("dichotomy violation: {0}")]
    DichotomyViolation(String),

    #[error("potential insufficiently smooth: {0}")]
    InsufficientlySmooth(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
