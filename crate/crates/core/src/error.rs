use thiserror::Error;

pub type Result<T> = std::result::Result<T, QrefError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QrefError {
    #[error("subsystem `{name}` has dimension {dim}; at least 2 is required")]
    SubsystemTooSmall { name: String, dim: usize },

    #[error("subsystem name must not be empty")]
    EmptyName,

    #[error("subsystem `{0}` appears more than once")]
    DuplicateSubsystem(String),

    #[error("subsystem `{0}` is not part of the space")]
    UnknownSubsystem(String),

    #[error("total dimension {0} exceeds the cap of {cap}", cap = crate::tensor::MAX_DIM)]
    DimensionCap(usize),

    #[error("amplitude vector has length {got}, space dimension is {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("matrix is not hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace is {0}, expected 1")]
    TraceNotOne(f64),

    #[error("matrix has negative eigenvalue {0:e}")]
    NotPositive(f64),

    #[error("operator is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("subsystem selection must not be empty")]
    EmptySelection,

    #[error("bipartition must split the space into two nonempty parts")]
    TrivialBipartition,

    #[error("spaces do not match: {0}")]
    SpaceMismatch(String),

    #[error(
        "degenerate spectrum (eigenvalue gap {gap:e}); possible internal states are not unique"
    )]
    DegenerateSpectrum { gap: f64 },

    #[error("subsystem sets overlap on `{0}`; use the pseudo-probability evaluation for non-disjoint systems")]
    NotDisjoint(String),

    #[error("basis states are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("basis does not diagonalize the reduced state (commutator norm {0:e})")]
    NotEigenbasis(f64),

    #[error("probability {0} lies outside [0, 1] beyond tolerance")]
    ProbabilityOutOfRange(f64),

    #[error("probability table sums to {0}, expected 1")]
    TableNotNormalized(f64),

    #[error("probability has imaginary part {0:e}")]
    ComplexProbability(f64),

    #[error("invalid measurement model: {0}")]
    InvalidModel(String),

    #[error("direction is not a unit vector (norm {0})")]
    NotUnitVector(f64),

    #[error("no response recorded for direction {0}")]
    MissingResponse(String),

    #[error("invalid hidden-variable model: {0}")]
    InvalidLhvModel(String),

    #[error("angles ({0}, {1}, {2}) cannot be realized by coplanar directions")]
    InconsistentAngles(f64, f64, f64),

    #[error("index {index} out of range for axis with {len} entries")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
