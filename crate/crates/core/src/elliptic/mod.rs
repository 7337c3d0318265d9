//! Finite-difference assembly of the elliptic operator
//! `-A v = div(a grad v) + b . grad v + c v` on boxes with Dirichlet boundary.

mod mesh;
mod operator;

pub use mesh::{subdomain_indices, Mesh, SubBox, MAX_DOF};
pub use operator::{assemble, check_ellipticity, CoefficientField, DiscreteOperator, OperatorHeader};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EllipticError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("{0} unknowns exceed the dense limit of {MAX_DOF}")]
    TooLarge(usize),
    #[error("coefficient arrays have lengths {found:?}, mesh needs {expected}")]
    ShapeMismatch { expected: usize, found: [usize; 3] },
    #[error("coefficients contain non-finite values")]
    NonFinite,
    #[error("a_12 != a_21 at full-grid node {0}")]
    NotSymmetric(usize),
    #[error("principal part not uniformly elliptic (smallest eigenvalue {0})")]
    NotElliptic(f64),
    #[error("sub-box contains no interior node")]
    EmptySubdomain,
}
