use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    MeshParse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("solid element {element} inverted (det J = {det:.3e})")]
    ElementInversion { element: usize, det: f64 },

    #[error("interface extension failed for body {body}: {msg}")]
    Extension { body: usize, msg: String },

    #[error("linear solver failure: {0}")]
    LinearSolve(String),

    #[error("Newton iteration failed at t = {time} after {iterations} iterations: {msg}")]
    Convergence {
        time: f64,
        iterations: usize,
        msg: String,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::MeshParse { .. } => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
