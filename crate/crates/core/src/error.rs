use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("assembly error on element {element}: {reason}")]
    Assembly { element: usize, reason: String },

    #[error("linear solve failed: relative residual {residual:e} ({reason})")]
    LinearSolve { residual: f64, reason: String },

    #[error("eigensolver did not converge after {iterations} iterations; worst residuals {residuals:?}")]
    Convergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("size error: {0}")]
    Size(String),

    #[error("undefined distance: {0}")]
    UndefinedDistance(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown gauge function `{0}` (expected one of xy, x2, sinxcosy)")]
    Catalog(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("property* violated at ({x}, {y}): every axis half-line meets the hole")]
    PropertyStar { x: f64, y: f64 },

    #[error("measure error: {0}")]
    Measure(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("log-domain error: {0}")]
    LogDomain(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("at epsilon = {epsilon}: {source}")]
    AtEpsilon {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn at_epsilon(self, epsilon: f64) -> Self {
        Error::AtEpsilon {
            epsilon,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidSpec(_)
            | Error::Config { .. }
            | Error::Io { .. }
            | Error::Catalog(_)
            | Error::Resolution(_) => true,
            Error::AtEpsilon { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
