use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, preset, or parameter values supplied by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    /// Arrays or grids that must match do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A wavefunction or density with no usable weight (zero norm, all-zero density).
    #[error("degenerate state: {0}")]
    Degenerate(String),

    /// Invalid parameter outside the domain of an operation.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An operation was called on a state that cannot accept it.
    #[error("state error: {0}")]
    State(String),

    /// Imaginary-time relaxation failed to reach the requested tolerance.
    #[error("relaxation did not converge within {steps} steps (last energy {last_energy}, last change {last_delta:e})")]
    Convergence {
        steps: usize,
        last_energy: f64,
        last_delta: f64,
    },

    /// NaN or infinity appeared where finite values are required.
    #[error("numerical blow-up: {0}")]
    Blowup(String),

    /// Probability density reached the grid edge beyond the allowed threshold.
    #[error("boundary leak: edge probability {leak:e} exceeds {threshold:e} at t = {time}")]
    BoundaryLeak { leak: f64, threshold: f64, time: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Pipeline failure tagged with the stage that produced it.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Name of the pipeline stage for tagged errors.
    pub fn stage_name(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}
