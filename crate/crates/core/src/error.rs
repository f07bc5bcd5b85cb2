use std::path::PathBuf;

/// Errors produced by grid construction, field operations, time stepping and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid metric spec: {0}")]
    InvalidMetricSpec(String),

    #[error("metric is not symmetric positive definite at node {node}")]
    NonSpdMetric { node: usize },

    #[error("connection generator for axis {axis} is not skew-symmetric")]
    NonSkewGenerator { axis: usize },

    #[error("invalid connection spec: {0}")]
    InvalidConnectionSpec(String),

    #[error("fields live on different grids")]
    ShapeMismatch,

    #[error("expected a rank-{expected} field, got rank {actual}")]
    RankMismatch { expected: usize, actual: usize },

    #[error("invalid contraction pairing: {0}")]
    InvalidPairing(String),

    #[error("grid too coarse for D^{k}: need at least {required} nodes per axis, have {actual}")]
    ResolutionTooSmall { k: usize, required: usize, actual: usize },

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("exponent balance violated: k/p = {lhs} but j/r + (k-j)/q = {rhs}")]
    ExponentBalance { lhs: f64, rhs: f64 },

    #[error("field is identically zero")]
    ZeroField,

    #[error("field contains non-finite values")]
    NonFinite,

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("invalid solver config: {0}")]
    InvalidSolverConfig(String),

    #[error("time step {dt} exceeds the parabolic CFL limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("blow-up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("missing required key `{0}`")]
    MissingKey(String),

    #[error("snapshot: bad magic bytes")]
    BadMagic,

    #[error("snapshot: CRC mismatch (stored {stored:08x}, computed {computed:08x})")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("snapshot: truncated ({0})")]
    Truncated(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
