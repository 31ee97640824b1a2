use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Variants split into two families: malformed input (shapes, labels,
/// parameter ranges, guard rails) and numerical failure of the model itself
/// (dark states, degenerate steady states, singular matrices). The CLI maps
/// the first family to exit code 2 and the second to exit code 3.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian/symmetric (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown outcome label or index: {0}")]
    UnknownOutcome(String),

    #[error("guard rail exceeded: {0}")]
    Guard(String),

    #[error("Kraus completeness violated (residual {residual:.3e})")]
    Completeness { residual: f64 },

    #[error("instrument is not trace preserving (residual {residual:.3e})")]
    NotTracePreserving { residual: f64 },

    #[error("superoperator does not preserve Hermiticity (residual {residual:.3e})")]
    NotHermiticityPreserving { residual: f64 },

    #[error("no eigenvalue within tolerance of 1 (closest distance {distance:.3e})")]
    NoSteadyState { distance: f64 },

    #[error("degenerate steady state: eigenvalue 1 has multiplicity {multiplicity}")]
    DegenerateSteadyState { multiplicity: usize },

    #[error("transient spectrum reaches the unit circle (|lambda| = {modulus:.12})")]
    UnitModulusTransient { modulus: f64 },

    #[error("no-jump generator is singular or ill-conditioned (condition {condition:.3e}); the model has a dark state")]
    DarkState { condition: f64 },

    #[error("matrix is numerically singular (condition {condition:.3e}): {context}")]
    Singular { condition: f64, context: String },

    #[error("matrix is defective: {0}")]
    Defective(String),

    #[error("probability has imaginary part {imag:.3e}")]
    ComplexProbability { imag: f64 },

    #[error("negative probability {value:.3e}")]
    NegativeProbability { value: f64 },

    #[error("initial state trace is {trace}, expected 1")]
    NotNormalized { trace: f64 },

    #[error("conditional probability undefined: p({0}) = 0")]
    UndefinedConditional(String),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("indices must be strictly increasing and start at 1")]
    NonIncreasingIndices,

    #[error("numerical collapse: all outcome probabilities vanish at step {step}")]
    Collapse { step: usize },

    #[error("empirical distribution violates the in/out constraints (residual {residual:.3e}, bound {bound:.3e})")]
    ConstraintViolation { residual: f64, bound: f64 },

    #[error("reconstruction mismatch (max error {max_error:.3e})")]
    ReconstructionMismatch { max_error: f64 },
}

impl Error {
    /// True for failures of the model or the numerics, as opposed to bad
    /// input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoSteadyState { .. }
                | Error::DegenerateSteadyState { .. }
                | Error::UnitModulusTransient { .. }
                | Error::DarkState { .. }
                | Error::Singular { .. }
                | Error::Defective(_)
                | Error::ComplexProbability { .. }
                | Error::NegativeProbability { .. }
                | Error::UndefinedConditional(_)
                | Error::SupportMismatch(_)
                | Error::Collapse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
