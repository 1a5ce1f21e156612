use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("sector too large: dimension {dim} exceeds limit {limit}")]
    SectorTooLarge { dim: usize, limit: usize },
    #[error("eigensolver did not converge (residual {residual:e})")]
    ConvergenceFailure { residual: f64 },
    #[error("degenerate constraint: normal vector vanishes after tangential projection")]
    DegenerateConstraint,
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),
    #[error("occupation vector does not lie on the hyperplane sum(n) = {expected} (got {got})")]
    OffHyperplane { expected: f64, got: f64 },
    #[error("target occupations lie outside the domain")]
    InfeasibleTarget,
    #[error("no kernel vector yields nonnegative radicands")]
    InfeasibleKernel,
    #[error("constrained search did not converge after {starts} starts (best violation {violation:e})")]
    NonConvergence { starts: usize, violation: f64 },
    #[error("domain is not in the simplex setting")]
    NotSimplex,
    #[error("facet {0} has no on-facet configuration states")]
    EmptyFacetBasis(usize),
    #[error("invalid facet point: {0}")]
    InvalidFacetPoint(String),
    #[error("path leaves the domain at eps = {0:e}")]
    PathExitsDomain(f64),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
