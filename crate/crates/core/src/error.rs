use thiserror::Error;

/// Errors produced by the monitoring pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid domain: hi ({hi}) must be greater than lo ({lo})")]
    InvalidDomain { lo: f64, hi: f64 },
    #[error("too few basis functions: need at least 4, got {0}")]
    TooFewBasis(usize),
    #[error("point {0} outside the basis domain")]
    PointOutOfDomain(f64),
    #[error("penalized system is singular (rank-deficient design with lambda = 0?)")]
    SingularSystem,
    #[error("non-finite value in input data")]
    NonFiniteInput,
    #[error("empty lambda grid")]
    EmptyGrid,
    #[error("GCV is non-finite at every lambda grid value")]
    AllGcvNonFinite,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("observation {id}, variable {var}: {n_points} points, need at least {needed}")]
    InsufficientPoints {
        id: String,
        var: String,
        n_points: usize,
        needed: usize,
    },
    #[error("argument value {arg} outside the declared domain for observation {id}")]
    ArgOutOfDomain { id: String, arg: f64 },
    #[error("variable {0} has (near-)zero standard deviation somewhere on its domain")]
    DegenerateVariable(String),
    #[error("unknown observation id {0}")]
    UnknownId(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("basis or variable set mismatch between operands")]
    BasisMismatch,
    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),
    #[error("component {0} has a zero eigenvalue and cannot enter the T2 statistic")]
    ZeroEigenvalue(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("insufficient residual degrees of freedom: n = {n}, components = {m}")]
    InsufficientDof { n: usize, m: usize },
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("unsupported R2 value {0}; supported: 0.97, 0.86, 0.74")]
    UnsupportedR2(f64),
    #[error("invalid shift type {0:?}; supported: none, A, B, C, D")]
    InvalidShiftType(String),
    #[error("input kind does not match the requested rendering: {0}")]
    KindMismatch(String),
    #[error("archive schema version {found} does not match expected {expected}")]
    SchemaVersionMismatch { expected: String, found: String },
    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("at domain fraction k = {k}: {source}")]
    AtK {
        k: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
