use thiserror::Error;

/// Errors raised anywhere in the pipeline. The CLI maps each family onto a
/// stable exit code (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("solve failed: {0}")]
    Solve(String),

    #[error("singular or near-singular system: {0}")]
    Singular(String),

    #[error(
        "omega^2 = {omega_sq} lies within {guard:e} of the resonance omega*^2 = {omega_star_sq}"
    )]
    PoleProximity {
        omega_sq: f64,
        omega_star_sq: f64,
        guard: f64,
    },

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Input(_) => 2,
            Error::Geometry(_) => 2,
            Error::Solve(_) => 3,
            Error::Mesh(_) => 4,
            Error::Singular(_) | Error::PoleProximity { .. } => 5,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
