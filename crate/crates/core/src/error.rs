use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("({i}, {j}) is not an edge of the graph")]
    NotAnEdge { i: usize, j: usize },

    #[error("non-positive diagonal entry a[{node}][{node}] = {value}")]
    NonPositiveDiagonal { node: usize, value: f64 },

    #[error("matrix is not symmetric at ({i}, {j}): {a_ij} vs {a_ji}")]
    Asymmetric { i: usize, j: usize, a_ij: f64, a_ji: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("ill-posed update at iteration {t}: {}", ill_posed_site(*from, *to, *value))]
    IllPosed { from: usize, to: usize, t: usize, value: f64 },

    #[error("initial message on edge {from}->{to} violates the curvature condition: {detail}")]
    InitialMessage { from: usize, to: usize, detail: String },

    #[error("minimiser for node {node} hit the domain boundary at {at} (domain [{lo}, {hi}])")]
    DomainBoundary { node: usize, at: f64, lo: f64, hi: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("computation tree would have {projected} nodes, above the limit of {limit}")]
    TreeTooLarge { projected: usize, limit: usize },

    #[error("bound not applicable: {0}")]
    BoundInapplicable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn ill_posed_site(from: usize, to: usize, value: f64) -> String {
    if from == to {
        format!("local objective of node {from} has curvature {value} <= 0")
    } else {
        format!("a_{{{from}->{to}}} = {value} <= 0")
    }
}
