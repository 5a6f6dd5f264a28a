use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("metric axiom `{axiom}` violated at indices ({i}, {j}, {k})")]
    MetricViolation {
        axiom: &'static str,
        i: usize,
        j: usize,
        k: usize,
    },
    #[error("subset A must be nonempty")]
    EmptySubset,
    #[error("subset A covers all of X; X\\A is empty")]
    SubsetCoversAll,
    #[error("diagram refers to vertex {vertex} but the graph has {n_offdiag} off-diagonal vertices")]
    GraphMismatch { vertex: usize, n_offdiag: usize },
    #[error("instance too large for brute force: {size} > {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("tensor-grid quadrature supports N <= 3, got N = {n}")]
    TensorTooHighDim { n: usize },
    #[error("grid inverse-CDF sampling supports N <= 2, got N = {n}")]
    TooHighDimForGrid { n: usize },
    #[error("Metropolis proposal tuning failed: acceptance rate {rate:.3} outside [0.2, 0.5]")]
    BadAcceptanceRate { rate: f64 },
    #[error("diagram point ({birth}, {death}) lies outside the ground grid")]
    PointOutsideGrid { birth: f64, death: f64 },
    #[error("diagrams quantized on different ground grids")]
    GridMismatch,
    #[error("mask shapes differ: {a:?} vs {b:?}")]
    ShapeMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("Gram matrix numerically indefinite: c^T G c = {value:.3e}")]
    NegativeNormSquared { value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
