//! Error type shared by all numerical modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite partial derivative at s = {s}")]
    NonFiniteDerivative { s: f64 },
    #[error("model does not provide analytic partials")]
    MissingAnalyticPartials,
    #[error("functional support [{a}, {b}] is not inside [-{t}, {t}]")]
    SupportOutOfRange { a: f64, b: f64, t: f64 },
    #[error("velocity Hessian is singular at s = {s} (det = {det:e})")]
    SingularLvv { s: f64, det: f64 },
    #[error("first-order model has a degenerate symplectic matrix at s = {s}")]
    DegenerateFirstOrder { s: f64 },
    #[error("integration blew up at s = {s}")]
    BlowUp { s: f64 },
    #[error("endpoint is conjugate to the initial point (normalized det = {det:e})")]
    ConjugatePoint { det: f64 },
    #[error("shooting did not converge after {iterations} steps (mismatch {mismatch:e})")]
    NoConvergence { iterations: usize, mismatch: f64 },
    #[error("trajectory is not a solution (residual {residual:e} > {threshold:e})")]
    NotASolution { residual: f64, threshold: f64 },
    #[error("grid mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: usize, found: usize },
    #[error("model carries no metric")]
    MissingMetric,
    #[error("endpoints -T and T are conjugate (normalized det = {det:e})")]
    ConjugateEndpoints { det: f64 },
    #[error("two-form pairing {rho} is degenerate ({value:e})")]
    DegenerateWronskian { rho: usize, value: f64 },
    #[error("support of '{label}' touches the boundary of the time grid")]
    SupportTouchesBoundary { label: String },
    #[error("unsupported source '{label}': {reason}")]
    UnsupportedSource { label: String, reason: String },
    #[error("operation needs a second-order model")]
    NotSecondOrder,
    #[error("first-order model needs an exact reference path")]
    MissingReference,
    #[error("operator is not Hermitian (deviation {deviation:e})")]
    NonHermitian { deviation: f64 },
    #[error("window of '{label}' is not contained in the time grid")]
    UnboundedWindow { label: String },
    #[error("time interval is resonant for {count} lattice modes")]
    ResonantInterval { count: usize },
    #[error("massless field has a zero mode; the commutator is undefined")]
    MasslessZeroMode,
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
}

impl Error {
    /// Name of the module family the error originates from.
    pub fn module(&self) -> &'static str {
        use Error::*;
        match self {
            InvalidInput(_) | NonFiniteDerivative { .. } | MissingAnalyticPartials | SupportOutOfRange { .. } => {
                "lagrangian-core"
            }
            SingularLvv { .. } | BlowUp { .. } | ConjugatePoint { .. } | NoConvergence { .. } => "el-solver",
            NotASolution { .. } | GridMismatch { .. } | MissingMetric => "jacobi",
            ConjugateEndpoints { .. }
            | DegenerateWronskian { .. }
            | SupportTouchesBoundary { .. }
            | UnsupportedSource { .. }
            | NotSecondOrder
            | MissingReference
            | DegenerateFirstOrder { .. } => "green-kernel",
            NonHermitian { .. } | UnboundedWindow { .. } => "qm-model",
            ResonantInterval { .. } | MasslessZeroMode | InvalidLattice(_) => "kg-field",
        }
    }
}
