use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Newton inversion did not converge at ({x}, {y}) after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        x: f64,
        y: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("mesh quality failure: {0}")]
    MeshQualityFailure(String),

    #[error("stitch failure: shared node mismatch {distance:e} at lattice key {key:?}")]
    StitchFailure { key: [i64; 2], distance: f64 },

    #[error("conductivity field is not elliptic: {0}")]
    NonEllipticField(String),

    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("at least {required} samples are required, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("ellipticity violation: {0}")]
    EllipticityViolation(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("mesh format error on line {line}: {message}")]
    Format { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
