use nalgebra::Complex;
use thiserror::Error;

/// Coarse grouping used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Parse,
    Structure,
    Solver,
    NonConvergence,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("structure violation: {0}")]
    Structure(String),

    #[error("class tag {0} needs a block partition")]
    MissingPartition(String),

    #[error("definiteness violated: {condition} (min eigenvalue {eigenvalue:.3e})")]
    Definiteness { condition: String, eigenvalue: f64 },

    #[error("resolvent singular at s = {0}")]
    ResolventSingular(Complex<f64>),

    #[error("pencil is singular at s = {0}")]
    PencilSingular(Complex<f64>),

    #[error("irregular pencil: det(sE - A) vanished at every probe {0:?}")]
    IrregularPencil(Vec<Complex<f64>>),

    #[error("improper behaviour: {0}")]
    Improper(String),

    #[error("Hamiltonian has eigenvalues on the imaginary axis (|Re| = {0:.3e})")]
    ImaginaryAxis(f64),

    #[error("no stabilizing solution: {0}")]
    NotStabilizing(String),

    #[error("ill-conditioned: {0}")]
    Conditioning(String),

    #[error("matrix is not Hurwitz (spectral abscissa {0:.3e})")]
    NotHurwitz(f64),

    #[error("nonzero feedthrough D (max entry {0:.3e})")]
    NonzeroD(f64),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("regularity assumption {name} violated (residual {residual:.3e})")]
    Regularity { name: String, residual: f64 },

    #[error("signature symmetry violated (residual {0:.3e})")]
    SymmetryResidual(f64),

    #[error("not solvable at gamma = {0}")]
    NotSolvable(f64),

    #[error("gamma = {gamma} is within 1e-6 of the infimum; try gamma >= {suggested}")]
    NearOptimal { gamma: f64, suggested: f64 },

    #[error("ill-posed feedback: {0}")]
    IllPosed(String),

    #[error("netlist: {0}")]
    Netlist(String),

    #[error("embedding: {0}")]
    Embedding(String),

    #[error("simulation diverged at t = {0}")]
    Diverged(f64),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),

    #[error("internal: {0}")]
    Internal(String),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Parse { .. } | Serde(_) | Netlist(_) => ErrorClass::Parse,
            Dimension(_)
            | Structure(_)
            | MissingPartition(_)
            | Definiteness { .. }
            | Regularity { .. }
            | SymmetryResidual(_)
            | Embedding(_)
            | Improper(_)
            | IrregularPencil(_)
            | IllPosed(_) => ErrorClass::Structure,
            Diverged(_) | NoConvergence(_) => ErrorClass::NonConvergence,
            _ => ErrorClass::Solver,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
