use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("bad header: expected `stratum,treated,outcome`, found `{0}`")]
    BadHeader(String),

    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("degenerate stratum `{stratum}`: {treated} of {size} subjects treated, both arms must be nonempty")]
    DegenerateStratum {
        stratum: String,
        treated: usize,
        size: usize,
    },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("stratum `{stratum}` has an arm with fewer than two subjects (treated {treated}, control {control})")]
    ArmTooSmall {
        stratum: String,
        treated: usize,
        control: usize,
    },

    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    AlphaOutOfRange(String),

    #[error("assignment space has {size} elements, above the enumeration cap {cap}")]
    EnumerationCapExceeded { size: String, cap: u64 },

    #[error("brute force needs N <= {cap}, experiment has N = {n}")]
    OracleCapExceeded { n: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed problem: {0}")]
    MalformedProblem(String),

    #[error("point violates problem constraints: {0}")]
    InfeasiblePoint(String),

    #[error("problem dump line {line}: {message}")]
    DumpParse { line: usize, message: String },

    #[error("solver budget exceeded on replication {replication}")]
    ReplicationBudgetExceeded { replication: usize },

    #[error("witness check failed: {0}")]
    WitnessCheck(String),
}
