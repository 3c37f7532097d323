use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("frequency discriminant {0:e} is below the degeneracy threshold")]
    OmegaDegenerate(f64),
    #[error("step {dt} too large: dt*|2U| = {product:.3} exceeds {bound}")]
    StepTooLarge { dt: f64, product: f64, bound: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("iterative solver did not converge: {0}")]
    NoConvergence(String),
    #[error("parity mismatch: {0}")]
    ParityMismatch(String),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("matrix has odd dimension {0}")]
    OddDimension(usize),
    #[error("matrix is not antisymmetric (deviation {0:e})")]
    NotAntisymmetric(f64),
    #[error("sector overlap is numerically singular: {0}")]
    SectorCollapse(String),
    #[error("Bloch radius {0:e} vanished; direction undefined")]
    PurityVanished(f64),
    #[error("grid too coarse: |dphi| = {0:.3} between samples")]
    GridTooCoarse(f64),
    #[error("window too short: {0}")]
    WindowTooShort(String),
    #[error("insufficient decay: |rho_x| drops by a factor {0:.3}")]
    InsufficientDecay(f64),
    #[error("fit diverged: {0}")]
    FitDiverged(String),
    #[error("ambiguous damping branch: residuals {overdamped:e} vs {oscillatory:e}")]
    AmbiguousBranch { overdamped: f64, oscillatory: f64 },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
