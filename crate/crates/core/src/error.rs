use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("degenerate potential: curvature {curvature} is not positive")]
    DegeneratePotential { curvature: f64 },

    #[error("Newton iteration did not converge after {iterations} steps (last step {last_step:e}, mean {mean}, var {var})")]
    NewtonNonConvergence {
        iterations: usize,
        last_step: f64,
        mean: f64,
        var: f64,
    },

    #[error("singular iteration: equation for `{equation}` produced {value}")]
    SingularIteration { equation: &'static str, value: f64 },

    #[error("degenerate overlap: eta_w = alpha m_w^2 / Q_w = {eta} must lie in [0, 1)")]
    DegenerateOverlap { eta: f64 },

    #[error("fixed point not converged after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("quadrature did not reach tolerance: estimate {estimate}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("optimum not bracketed in [{lo}, {hi}]: {reason}")]
    Bracket {
        lo: f64,
        hi: f64,
        reason: &'static str,
    },

    #[error("Bernoulli edge probability {p} out of [0, 1] for d = {d}, lambda = {lambda}, n = {n}")]
    EdgeProbability { d: f64, lambda: f64, n: usize, p: f64 },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("feature column {column} has zero variance after noising")]
    ZeroVarianceColumn { column: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("training did not converge after {steps} steps (gradient sup-norm {grad_norm:e})")]
    TrainNotConverged { steps: usize, grad_norm: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed dataset bundle: {0}")]
    Bundle(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
