use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid particle: {0}")]
    InvalidParticle(String),

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("shape mismatch: {0}")]
    Mismatch(String),

    #[error("gauge form violation: {0}")]
    GaugeForm(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("imaginary-time relaxation did not converge after {iterations} iterations (last energy change {delta:e})")]
    NotConverged { iterations: usize, delta: f64 },

    #[error("boundary contamination at t = {time}: edge density {edge_density:e} exceeds {threshold:e}")]
    BoundaryContamination {
        time: f64,
        edge_density: f64,
        threshold: f64,
    },

    #[error("kick too large: linearity deviation {ratio:e} exceeds {tolerance:e}")]
    Nonlinear { ratio: f64, tolerance: f64 },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Machine-readable cause tag written into reports.
    pub fn cause(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) | Error::InvalidParticle(_) | Error::Mismatch(_) => "invalid_input",
            Error::DegenerateState(_) => "degenerate_state",
            Error::GaugeForm(_) => "gauge_form",
            Error::SolverDivergence { .. } => "solver_divergence",
            Error::NotConverged { .. } => "not_converged",
            Error::BoundaryContamination { .. } => "boundary_contamination",
            Error::Nonlinear { .. } => "nonlinear_response",
            Error::Scenario(_) => "scenario",
            Error::Io(_) => "io",
        }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SolverDivergence { .. }
                | Error::NotConverged { .. }
                | Error::BoundaryContamination { .. }
                | Error::Nonlinear { .. }
                | Error::DegenerateState(_)
        )
    }
}
