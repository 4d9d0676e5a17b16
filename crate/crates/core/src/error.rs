use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("ill-conditioned input: {0}")]
    Conditioning(String),
    #[error("operator basis is not orthonormal (deviation {0:.3e})")]
    Basis(f64),
    #[error("positivity violation: minimum eigenvalue {0:.3e}")]
    Positivity(f64),
    #[error("correlation function has not decayed inside the time window: {0}")]
    Window(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("frequency- and time-domain rates disagree (relative deviation {0:.3e})")]
    Consistency(f64),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("incomplete spectrum: no mirrored pair for {0}")]
    IncompleteSpectrum(String),
    #[error("no positive fixed point found: {0}")]
    NonRelaxing(String),
    #[error("integration failed: {0}")]
    Stiffness(String),
    #[error("trajectory too sparse: {0}")]
    Resolution(String),
    #[error("dimension {0} exceeds the cap {1}")]
    Capacity(usize, usize),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("divergent input: {0}")]
    Divergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
