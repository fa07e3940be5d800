use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {got} values but the grid has {expected} points")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid spacing {dx:.4e} does not resolve the soliton (need <= {required:.4e})")]
    Unresolved { dx: f64, required: f64 },

    #[error("soliton too close to the box boundary: {0}")]
    NearBoundary(String),

    #[error("minimization did not converge in {iterations} iterations (step {step:.3e}, residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        step: f64,
        residual: f64,
    },

    #[error("minimization collapsed: iterate norm vanished at iteration {0}")]
    Collapse(usize),

    #[error("minimizer energy {0:.6e} is not negative: spreading regime, no ground state at this charge")]
    Spreading(f64),

    #[error("profile changed sign at iteration {0}")]
    PositivityLost(usize),

    #[error("non-finite field encountered at t = {0}")]
    NonFiniteState(f64),

    #[error("amplitude blow-up at t = {t}: sup|psi| grew by {ratio:.2}x")]
    BlowUp { t: f64, ratio: f64 },

    #[error("unreachable tolerance {0}")]
    UnreachableTolerance(f64),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
