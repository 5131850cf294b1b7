use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::Cell;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("operator expects {expected} grid, found {found}")]
    TopologyMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("kernel family needs at least one coefficient")]
    EmptyFamily,
    #[error("{what} is supported outside the region at cell {cell}")]
    SupportViolation { what: &'static str, cell: Cell },
    #[error("source is nonzero at {cell}, outside the solver's source domain")]
    SourceOutsideDomain { cell: Cell },
    #[error("non-finite value in grid function")]
    NonFinite,
    #[error("I + A(λ)E is nearly singular at λ = {lambda}: σ_min = {sigma_min:e}")]
    NearSingular { lambda: Complex64, sigma_min: f64 },
    #[error("stage {stage} of the LU factorisation is nearly singular at λ = {lambda}: σ_min = {sigma_min:e}")]
    StageNearSingular {
        stage: usize,
        lambda: Complex64,
        sigma_min: f64,
    },
    #[error("dense assembly of {cells} cells exceeds the cap of {cap}")]
    DenseCapExceeded { cells: usize, cap: usize },
    #[error("dense system is singular")]
    SingularSystem,
    #[error("no formal dual for {0}")]
    UnsupportedDual(&'static str),
    #[error("operator is not formally self-adjoint (defect {0:e})")]
    NotSelfAdjoint(f64),
    #[error("cannot normalise: {0}")]
    Normalization(String),
    #[error("system description: {0}")]
    InvalidSystem(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
