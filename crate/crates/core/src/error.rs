//! Error types shared by all modules.

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while building or reversing a process.
///
/// Numeric diagnostics are carried as `f64` regardless of the working scalar
/// so the error type stays object-safe and non-generic.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("alphabet is empty")]
    EmptyAlphabet,
    #[error("duplicate label `{label}` in alphabet")]
    DuplicateLabel { label: String },
    #[error("negative mass {value:e} at index {index}")]
    NegativeMass { index: usize, value: f64 },
    #[error("masses sum to {sum:.17e}, deviates from 1 by more than {tol:e}")]
    NotNormalized { sum: f64, tol: f64 },
    #[error("channel is not square: {inputs} inputs vs {outputs} outputs")]
    NotSquare { inputs: usize, outputs: usize },
    #[error("distribution is not invariant for the channel: residual {residual:e} > {tol:e}")]
    NotInvariant { residual: f64, tol: f64 },
    #[error("support of the reference distribution is empty")]
    EmptySupport,
    #[error("alphabet mismatch: {context}")]
    AlphabetMismatch { context: String },
    #[error("prior puts mass {mass:e} on `{label}`, outside the steady-state support")]
    PriorOutsideSupport { label: String, mass: f64 },
    #[error(
        "support mismatch at ({x}, {y}): forward {forward:e}, reverse {reverse:e}; \
         the reverse process is ill-posed on this pair"
    )]
    SupportMismatch {
        x: String,
        y: String,
        forward: f64,
        reverse: f64,
    },
    #[error("family parameter must be nonzero")]
    ZeroParameter,
    #[error("custom f failed validation: {reason}")]
    NonInvertibleCustom { reason: String },
    #[error("function undefined at {value:e} ({context})")]
    DomainError { context: String, value: f64 },
    #[error("no reverse atom at g(omega) = {target:e} although the forward weight is {weight:e}")]
    MissingReverseAtom { target: f64, weight: f64 },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("matrix is not Hermitian: max |A - A†| entry is {max_asym:e}")]
    NotHermitian { max_asym: f64 },
    #[error("operator is not positive semidefinite: min eigenvalue {min_eig:e}")]
    NotPositive { min_eig: f64 },
    #[error("trace is {trace:.17e}, expected 1")]
    TraceNotOne { trace: f64 },
    #[error("POVM elements do not resolve the identity: max deviation {residual:e}")]
    PovmIncomplete { residual: f64 },
    #[error("map is not CPTP: {detail}")]
    NotCptp { detail: String },
    #[error("reference state is singular and support restriction left nothing to invert")]
    SingularReference,
    #[error("outcome `{label}` has weight {weight:e}; retrodictive state undefined")]
    ZeroOutcomeWeight { label: String, weight: f64 },
    #[error("map is not a bijection on the state labels")]
    NotBijective,
    #[error("energy shell at {energy:e} contains no states")]
    EmptyShell { energy: f64 },
    #[error("steady state is not unique; pass the reference distribution explicitly")]
    NonUniqueSteadyState,
    #[error("steady state puts zero mass on `{label}`; scenario requires full support")]
    SingularSteadyState { label: String },
    #[error("iteration failed to converge ({what}): residual {residual:e}")]
    NoConvergence { what: String, residual: f64 },
}
