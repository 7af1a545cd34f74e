use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a formula (|v| >= 1, p <= 0, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Conserved state outside the admissible set where one was required.
    #[error("inadmissible state: {0}")]
    Inadmissible(String),

    /// Primitive recovery did not converge.
    #[error("recovery did not converge after {iterations} iterations (theta = {theta:e}, residual = {residual:e})")]
    Convergence {
        iterations: usize,
        theta: f64,
        residual: f64,
    },

    /// Failure while assembling the DG right-hand side, tagged with location.
    #[error("cell ({i}, {j}) {location}: {source}")]
    Assembly {
        i: usize,
        j: usize,
        location: String,
        #[source]
        source: Box<Error>,
    },

    /// Failure inside a Runge-Kutta stage.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported polynomial degree {0} (expected 0, 1 or 2)")]
    UnsupportedDegree(usize),

    #[error("boundary configuration: {0}")]
    Boundary(String),

    #[error("configuration key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
