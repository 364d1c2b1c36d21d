use thiserror::Error;

/// Errors from graph construction, model assembly, optimization and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph carries no node coordinates; probabilities must be supplied externally")]
    MissingCoordinates,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("edge index {index} out of range (graph has {n_edges} edges)")]
    EdgeIndexOutOfRange { index: usize, n_edges: usize },

    #[error("node index {index} out of range (graph has {n_nodes} nodes)")]
    NodeIndexOutOfRange { index: usize, n_nodes: usize },

    #[error("self-loop at node {0} is not allowed")]
    SelfLoop(usize),

    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),

    #[error("non-finite weight at edge index {0}")]
    NonFiniteWeight(usize),

    #[error("probability {value} at edge index {index} outside (0, 1]")]
    InvalidProbability { index: usize, value: f64 },

    #[error("matrix is not symmetric: max asymmetry {0:.3e} exceeds tolerance")]
    NotSymmetric(f64),

    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("eigendecomposition did not converge within {0} sweeps")]
    EigNoConvergence(usize),

    #[error(
        "cross-covariance matrix is not positive semidefinite (min eigenvalue {0:.3e}); \
         shrink the correlation constant"
    )]
    NotPositiveSemidefinite(f64),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("error vector is not orthogonal to the all-ones direction (overlap {0:.3e})")]
    NotOrthogonal(f64),

    #[error("no feasible iterate found within {iterations} iterations")]
    NoFeasibleIterate {
        iterations: usize,
        trace: Vec<crate::optimizer::IterationRecord>,
    },

    #[error("no feasible initialization after {0} halvings of the Metropolis weights")]
    InfeasibleInitialization(usize),

    #[error("iterates diverged (non-finite weight) at iteration {0}")]
    Diverged(usize),

    #[error("could not realize a connected graph with {target} edges in {attempts} attempts")]
    EdgeCountUnreachable { target: usize, attempts: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
