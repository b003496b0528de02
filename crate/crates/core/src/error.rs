use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is singular (pivot {pivot:e} below threshold {threshold:e})")]
    SingularMatrix { pivot: f64, threshold: f64 },
    #[error("syntax error at {line}:{column}: expected {expected}")]
    SyntaxError {
        line: usize,
        column: usize,
        expected: String,
    },
    #[error("variable z{index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("division by a value of modulus {modulus:e}")]
    DivisionNearZero { modulus: f64 },
    #[error("alpha^2 = {alpha_sq:e} is not positive at this point")]
    DegenerateAlpha { alpha_sq: f64 },
    #[error("eta is the zero vector")]
    ZeroSection,
    #[error("base metric a_ij is singular")]
    SingularBaseMetric,
    #[error("pole at alpha = beta (alpha = {alpha}, beta = {beta})")]
    PoleAtAlphaEqualsBeta { alpha: f64, beta: f64 },
    #[error("point is within {distance:e} of the singular locus (need > {required:e})")]
    TooCloseToSingularLocus { distance: f64, required: f64 },
    #[error("sigma invariants undefined at alpha = {alpha}, beta = {beta}")]
    SigmaUndefined { alpha: f64, beta: f64 },
    #[error("finite-difference stencil unstable: error estimate {estimate:e} vs scale {scale:e}")]
    UnstableStencil { estimate: f64, scale: f64 },
    #[error("rank-one update is singular: |1 ± C²| = {modulus:e}")]
    UpdateSingular { modulus: f64 },
    #[error("a_ij̄ is nonzero; the inversion pipeline needs the non-Hermitian case")]
    NotNonHermitian,
    #[error("inversion step {step} is singular")]
    StepSingular { step: u8 },
    #[error("inversion pipeline needs the derived sigma variant")]
    WrongSigmaVariant,
    #[error("no valid points (beta > alpha > 0) among {attempts} samples")]
    NoValidPoints { attempts: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable identifier used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::SyntaxError { .. } => "SyntaxError",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::DivisionNearZero { .. } => "DivisionNearZero",
            Error::DegenerateAlpha { .. } => "DegenerateAlpha",
            Error::ZeroSection => "ZeroSection",
            Error::SingularBaseMetric => "SingularBaseMetric",
            Error::PoleAtAlphaEqualsBeta { .. } => "PoleAtAlphaEqualsBeta",
            Error::TooCloseToSingularLocus { .. } => "TooCloseToSingularLocus",
            Error::SigmaUndefined { .. } => "SigmaUndefined",
            Error::UnstableStencil { .. } => "UnstableStencil",
            Error::UpdateSingular { .. } => "UpdateSingular",
            Error::NotNonHermitian => "NotNonHermitian",
            Error::StepSingular { .. } => "StepSingular",
            Error::WrongSigmaVariant => "WrongSigmaVariant",
            Error::NoValidPoints { .. } => "NoValidPoints",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}
