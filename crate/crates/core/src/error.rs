use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bit string length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid bit string {0:?}")]
    InvalidBitString(String),

    #[error("bit string of length {len} cannot hold value {value}")]
    ValueOutOfRange { len: usize, value: usize },

    #[error("table length {len} is not 2^{n}")]
    TableLength { n: usize, len: usize },

    #[error("not a probability table: {0}")]
    NotProbability(String),

    #[error("invalid register layout: {0}")]
    Layout(String),

    #[error("qubit {qubit} out of range for {total}-qubit register")]
    QubitOutOfRange { qubit: usize, total: usize },

    #[error("{total} qubits exceeds the simulator cap of {cap}")]
    TooManyQubits { total: usize, cap: usize },

    #[error("gate targets overlap its control predicate on qubit {0}")]
    TargetInPredicate(usize),

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("unknown register {0:?}")]
    UnknownRegister(String),

    #[error("invalid circuit spec: {0}")]
    Spec(String),

    #[error("claim check failed: {0}")]
    Claim(String),

    #[error("target unreachable: the starting state has no overlap with the target subspace")]
    TargetUnreachable,

    #[error("states belong to different register layouts")]
    LayoutMismatch,

    #[error("insufficient shots: no (omega=0, gamma=0) outcomes among {shots} samples")]
    InsufficientShots { shots: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
