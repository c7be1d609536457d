use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error("mode index {mode} out of range for {n_modes} modes")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("capacitance matrix is not positive definite")]
    CapacitanceNotPositiveDefinite,

    #[error("mode softening: no solution for eta_{mode} in the bracket (form factor nonpositive)")]
    ModeSoftening { mode: char },

    #[error("no minimum of the coupler potential found in the principal branch")]
    NoPotentialMinimum,

    #[error("quadratic form is not symmetric")]
    NonSymmetric,

    #[error("unstable normal mode (negative eigenvalue {0})")]
    UnstableMode(f64),

    #[error("{what} did not converge within {budget} steps")]
    NoConvergence { what: &'static str, budget: usize },

    #[error("minimizer hit the bracket edge at {at} GHz (resonance outside scan window)")]
    BracketEdge { at: f64 },

    #[error("no bracketing interval found for {0}")]
    NoBracket(&'static str),

    #[error("unknown gate `{0}`")]
    UnknownGate(String),

    #[error("propagator grid was not retained")]
    GridNotRetained,

    #[error("label {0} is not tracked")]
    LabelMissing(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidInput { field, reason: reason.into() }
}
