use thiserror::Error;

/// Broad failure class, used by the CLI to pick an exit code and by scripts
/// that need a machine-readable reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Geometry,
    Solver,
    Io,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Geometry => "geometry",
            Category::Solver => "solver",
            Category::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid coefficient scheme: {0}")]
    Coefficients(String),

    #[error("invalid phantom: {0}")]
    Phantom(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("f(theta) is singular at theta = {theta} (ray {ray})")]
    SingularAngle { theta: f64, ray: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("singular reduced system (condition number {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("missing pairwise field ({0}, {1})")]
    MissingPair(usize, usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Geometry(_) | Error::Coefficients(_) | Error::Phantom(_) | Error::SingularAngle { .. } => {
                Category::Geometry
            }
            Error::Domain(_)
            | Error::Solver(_)
            | Error::SingularSystem { .. }
            | Error::Dimension { .. }
            | Error::MissingPair(..) => Category::Solver,
            Error::Config(_) | Error::Parse { .. } => Category::Config,
            Error::Io(_) => Category::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
