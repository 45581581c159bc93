use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh level must be at least 1, got {0}")]
    InvalidLevel(u32),

    #[error("invalid mesh coordinates: {0}")]
    InvalidMesh(String),

    #[error("cell index ({i}, {j}) out of range for {nx}x{ny} grid")]
    CellOutOfRange { i: usize, j: usize, nx: usize, ny: usize },

    #[error("unsupported polynomial degree k = {0}")]
    UnsupportedDegree(usize),

    #[error("quadrature order {0} outside supported range 1..=32")]
    QuadratureOrder(usize),

    #[error("matrix is not symmetric positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("linear solve residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    SolveResidual { residual: f64, tol: f64 },

    #[error("singular local system: {0}")]
    SingularSystem(String),

    #[error("{method} did not converge in {iterations} iterations (last measure {last:.3e})")]
    MaxIterations {
        method: &'static str,
        iterations: usize,
        last: f64,
    },

    #[error("{method} diverged after {iterations} iterations")]
    Diverged {
        method: &'static str,
        iterations: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("level {level}: {source}")]
    AtLevel {
        level: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("sparse backend: {0}")]
    Backend(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
