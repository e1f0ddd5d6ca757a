use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("face {face} is degenerate: diagonal cross product norm {norm:e} below tolerance")]
    DegenerateFace { face: usize, norm: f64 },

    #[error("vertex {vertex} has a degenerate normal: face normal sum norm {norm:e}")]
    DegenerateNormal { vertex: usize, norm: f64 },

    #[error("face {face}: edge vector at corner {corner} is degenerate")]
    DegenerateAngle { face: usize, corner: usize },

    #[error("unit-square map system is singular for the given quad")]
    SingularSystem,

    #[error("jacobian is singular (|det| = {det:e})")]
    SingularJacobian { det: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: face has {count} vertices, only quads are supported")]
    NonQuadFace {
        path: PathBuf,
        line: usize,
        count: usize,
    },

    #[error("printing speed must be positive, got {0}")]
    NegativeSpeed(f64),

    #[error("pitch {pitch} does not divide {extent}")]
    BadPitch { pitch: f64, extent: f64 },

    #[error("invalid geometry: {0}")]
    BadGeometry(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("damped normal equations could not be solved after {attempts} damping increases")]
    LinearSolveFailure { attempts: usize },

    #[error("sparse factorization failed: {0}")]
    FactorizationFailure(String),

    #[error("residual vector contains non-finite entries")]
    NonFiniteResidual,

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("design schema: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors coming out of the numerical pipeline rather than
    /// bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateFace { .. }
                | Error::DegenerateNormal { .. }
                | Error::DegenerateAngle { .. }
                | Error::SingularSystem
                | Error::SingularJacobian { .. }
                | Error::LinearSolveFailure { .. }
                | Error::FactorizationFailure(_)
                | Error::NonFiniteResidual
                | Error::FitFailure(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
