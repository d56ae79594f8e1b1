use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension {got} is not supported here (allowed 1..={max})")]
    Dimension { got: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("control point lies outside the control box")]
    ControlOutOfBox,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("time step {dt} violates the monotonicity bound dt <= {bound}")]
    Cfl { dt: f64, bound: f64 },

    #[error("diffusion matrix is not diagonally dominant at node {node}")]
    NotDiagonallyDominant { node: usize },

    #[error("grid too coarse: axis {axis} has {nodes} node(s), need at least 2")]
    GridTooCoarse { axis: usize, nodes: usize },

    #[error("horizon {t} exceeds the grid horizon t_end = {t_end}")]
    HorizonBeyondEnd { t: f64, t_end: f64 },

    #[error("need at least {needed} time slices, got {got}")]
    TooFewSlices { needed: usize, got: usize },

    #[error("no smoothing at t = 0: the identity operator preserves jumps")]
    ZeroHorizon,

    #[error("maximum principle violated: |u| = {value} exceeds |psi| = {bound}")]
    MaximumPrinciple { value: f64, bound: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
