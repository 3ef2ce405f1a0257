use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension cap exceeded: {qubits} qubits requested, at most {cap} supported")]
    DimensionCap { qubits: usize, cap: usize },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid Pauli word: {0}")]
    InvalidPauli(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("tail order {order} overlaps the retained band [-{cutoff}, {cutoff}]")]
    TailOverlap { order: i64, cutoff: usize },

    #[error("monodromy not unitary: max |U'U - I| = {defect:e}")]
    NotUnitary { defect: f64 },

    #[error("eigenstate index {alpha} out of range (dimension {dim})")]
    InvalidAlpha { alpha: usize, dim: usize },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("band {k} not available (computed range [{k_min}, {k_max}])")]
    MissingBand { k: i64, k_min: i64, k_max: i64 },

    #[error("Nyquist violation: {samples} samples per period cannot resolve cutoff {cutoff} (need >= {required})")]
    Nyquist {
        samples: usize,
        cutoff: usize,
        required: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("insufficient trials: {got} given, at least {required} required")]
    InsufficientTrials { got: usize, required: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
