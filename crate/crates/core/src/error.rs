use thiserror::Error;

use crate::scf::SolitonState;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum SolitonError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("cannot normalize zero function")]
    ZeroNormalization,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("k exceeds grid resolution (k = {k}, n = {n})")]
    KExceedsResolution { k: usize, n: usize },

    #[error("eigenvalue not below continuum (k = {k}: only {found} eigenvalue(s) below {threshold:e})")]
    NotBelowContinuum { k: usize, found: usize, threshold: f64 },

    #[error("bracket contains no k-th eigenvalue (k = {k}, bracket [{lo}, {hi}])")]
    EmptyBracket { k: usize, lo: f64, hi: f64 },

    #[error("no negative eigenvalue: no solitary wave in this regime ({reason})")]
    NoSolitaryWave { z: f64, reason: String },

    #[error("max iterations exceeded ({iterations} iterations, last |dω| = {last_domega:e})")]
    MaxIterations {
        iterations: usize,
        last_domega: f64,
        state: Box<SolitonState>,
    },

    #[error("decay window empty, increase r_max")]
    EmptyDecayWindow,

    #[error("requires N = z (got N = {n_charge}, z = {z})")]
    RequiresNeutral { n_charge: f64, z: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("k = {k}: {source}")]
    AtIndex {
        k: usize,
        #[source]
        source: Box<SolitonError>,
    },
}

impl SolitonError {
    /// True for the outcome where no bound state exists, possibly wrapped by a sweep.
    pub fn is_no_solitary_wave(&self) -> bool {
        match self {
            SolitonError::NoSolitaryWave { .. } => true,
            SolitonError::AtIndex { source, .. } => source.is_no_solitary_wave(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, SolitonError>;
