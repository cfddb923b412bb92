use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("explicit scheme unstable: dt = {dt:e} exceeds dx^2/2 = {limit:e}")]
    Unstable { dt: f64, limit: f64 },

    #[error("{what} index {index} out of range (limit {limit})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("kernel evaluated at t = {t:e} below the admissible minimum {min_t:e}")]
    KernelDomain { t: f64, min_t: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical blow-up at step {step} (replication {replication})")]
    BlowUp { step: usize, replication: u64 },

    #[error(
        "coefficient set `{tag}` rejected: |sigma(x) z| = {value} < rho = {rho} at x = {x:?}, z = {z:?}"
    )]
    NotElliptic {
        tag: String,
        x: Vec<f64>,
        z: Vec<f64>,
        value: f64,
        rho: f64,
    },

    #[error("coefficient set `{tag}` exceeds its bound M = {bound} at x = {x:?} (value {value})")]
    BoundExceeded {
        tag: String,
        x: Vec<f64>,
        value: f64,
        bound: f64,
    },

    #[error("dimension d = {d} unsupported here (local time requires d <= {max})")]
    UnsupportedDimension { d: usize, max: usize },

    #[error("need at least {required} usable scales, got {usable}")]
    InsufficientScales { usable: usize, required: usize },

    #[error("degenerate fit: level at scale {scale:e} is not positive")]
    DegenerateFit { scale: f64 },

    #[error("under-resolved density estimate: effective count {count:.1} < {required}")]
    UnderResolved { count: f64, required: f64 },

    #[error("divergent integral: exponent b[{index}] = {exponent} must be < 1")]
    DivergentIntegral { index: usize, exponent: f64 },
}
