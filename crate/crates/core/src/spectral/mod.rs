//! Eigenvalue clusters, Riesz projections and nilpotent parts of a real
//! non-symmetric matrix, with checks of the projection identities.

mod eigen;
mod riesz;

use num_complex::Complex64;

pub use eigen::{default_cluster_tol, eigendecompose, Cluster, Eigensystem};
pub use riesz::{
    check_enclosure, completeness_defect, resolvent, lemma3_check, max_abs, numerical_rank, riesz_decomposition,
    riesz_projection, to_complex, verify_identities, write_spectrum_csv, CMatrix, IdentityReport, Lemma3Report,
    RieszData, DEFAULT_CONTOUR_NODES,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("{0}")]
    Shape(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("resolvent nearly singular at z = {z} (distance estimate {distance:.3e})")]
    NearSingular { z: Complex64, distance: f64 },
    #[error("circle |z - {lambda}| = {radius} encloses {inside} eigenvalues, expected {expected}")]
    Enclosure {
        lambda: Complex64,
        radius: f64,
        inside: usize,
        expected: usize,
    },
    #[error("no chain end found within multiplicity {multiplicity} at {lambda}")]
    ChainTooLong { lambda: Complex64, multiplicity: usize },
}
