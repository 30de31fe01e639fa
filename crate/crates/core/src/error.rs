use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hole radius {0}: expected 0 <= r < 1/2")]
    InvalidRadius(f64),

    #[error("degenerate mesh: {0}")]
    MeshDegenerate(String),

    #[error("epsilon = {epsilon} does not tile a side of length {length}")]
    TilingMismatch { epsilon: f64, length: f64 },

    #[error("field or operator does not live on the expected mesh: {0}")]
    MeshMismatch(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("infeasible bounds at dof {index}: lower {lower} > upper {upper}")]
    InfeasibleBounds { index: usize, lower: f64, upper: f64 },

    #[error("cell matrix identity violated: residual {residual:.3e} > {tol:.3e}")]
    IdentityViolation { residual: f64, tol: f64 },

    #[error("point ({0}, {1}) lies outside the mesh")]
    PointOutsideDomain(f64, f64),

    #[error("total energy increased across a half-step: {before:.17e} -> {after:.17e}")]
    EnergyIncrease { before: f64, after: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, used by the command-line driver.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidRadius(_) => "INVALID_RADIUS",
            Error::MeshDegenerate(_) => "MESH_DEGENERATE",
            Error::TilingMismatch { .. } => "TILING_MISMATCH",
            Error::MeshMismatch(_) => "MESH_MISMATCH",
            Error::SingularSystem(_) => "SINGULAR_SYSTEM",
            Error::NoConvergence { .. } => "NO_CONVERGENCE",
            Error::InfeasibleBounds { .. } => "INFEASIBLE_BOUNDS",
            Error::IdentityViolation { .. } => "IDENTITY_VIOLATION",
            Error::PointOutsideDomain(..) => "POINT_OUTSIDE_DOMAIN",
            Error::EnergyIncrease { .. } => "ENERGY_INCREASE",
            Error::Parse { .. } => "PARSE_ERROR",
            Error::Validation { .. } => "VALIDATION_ERROR",
            Error::AtStep { source, .. } => source.code(),
            Error::Io(_) => "IO_ERROR",
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}
