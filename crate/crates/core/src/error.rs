use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function '{name}' at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unbound variable '{0}'")]
    Unbound(String),
    #[error("domain error: {what} (at {at})")]
    Domain { what: String, at: String },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("metric at {point:?} has signature ({negative} negative, {positive} positive, {degenerate} degenerate); expected {expected}")]
    Signature {
        point: Vec<f64>,
        negative: usize,
        positive: usize,
        degenerate: usize,
        expected: &'static str,
    },
    #[error("singular metric at {0:?}")]
    SingularMetric(Vec<f64>),
    #[error("node {node} is not spacelike: induced metric eigenvalues {eigenvalues:?}")]
    NonSpacelike { node: usize, eigenvalues: Vec<f64> },
    #[error("degenerate plane at {0:?}")]
    DegeneratePlane(Vec<f64>),
    #[error("graph is not spacelike at node {node}: margin 1 - h|grad u|^2 = {margin}")]
    GraphNotSpacelike { node: usize, margin: f64 },
    #[error("nonpositive density {value} at node {node}")]
    NonPositiveDensity { node: usize, value: f64 },
    #[error("operation requires a closed submanifold, but the mesh has boundary")]
    HasBoundary,
    #[error("operation requires a Dirichlet domain")]
    NotDirichlet,
    #[error("operation requires a closed domain")]
    NotClosed,
    #[error("conformal Laplacian needs dimension n >= 3 (got {0}); the conformal metric does not exist for surfaces")]
    UnsupportedDimension(usize),
    #[error("geodesic left the coordinate domain at parameter {param}: {reason}")]
    GeodesicLeftDomain { param: f64, reason: String },
    #[error("linear solver failure: {0}")]
    Linear(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
