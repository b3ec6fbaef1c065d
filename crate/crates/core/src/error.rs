use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (shape, symmetry, range).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("matrix is not positive definite (pivot {pivot} = {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("non-finite value produced in layer {layer}")]
    NonFinite { layer: usize },

    #[error("could not place {n} non-parallel points in dimension {d} after {attempts} draws")]
    RejectionExhausted { n: usize, d: usize, attempts: usize },

    #[error("training diverged at t = {t:.4e}: loss {loss:.4e} vs initial {initial:.4e}")]
    Divergence { t: f64, loss: f64, initial: f64 },

    #[error("initial norm of block {block} is zero")]
    ZeroNorm { block: String },

    #[error(
        "gram scaling relation broken at layer {layer}, entry ({i}, {j}): raw {raw:.6e} vs rescaled normalized {rescaled:.6e}"
    )]
    ScalingMismatch {
        layer: usize,
        i: usize,
        j: usize,
        raw: f64,
        rescaled: f64,
    },

    #[error(
        "quadrature order {order} unconfirmed: {matrix}[{layer}] entry ({i}, {j}) moved by {delta:.3e} on doubling"
    )]
    QuadratureUnconfirmed {
        order: usize,
        matrix: &'static str,
        layer: usize,
        i: usize,
        j: usize,
        delta: f64,
    },

    #[error("covariance is indefinite: k_ii = {k_ii:.3e}, k_ij = {k_ij:.3e}, k_jj = {k_jj:.3e}")]
    IndefiniteCovariance { k_ii: f64, k_ij: f64, k_jj: f64 },

    #[error("second-moment lower constant is not positive ({0:.3e})")]
    NonPositiveMoment(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
