//! Subdomain observability of `(a, b) -> u|_(omega x (0, T))`: the observation
//! map and its singular spectrum, the resolvent and projection cascades behind
//! injectivity, the branch-identity probe and regularised source recovery.

mod branch;
mod continuation;
mod inversion;
mod observation;

pub use branch::{branch_identity_probe, probe_vectors, BranchRow, ProbeVector};
pub use continuation::{
    cascade_from_kernel, chebyshev_points, default_samples, projection_cascade_check, resolvent_vanishing_check,
    CascadeReport, ClusterCascade, VanishingReport,
};
pub use inversion::{
    add_noise, invert_source, relative_error, write_recovery_csv, Recovery, Regularization, DEFAULT_TIKHONOV,
};
pub use observation::{
    build_observation_map, injectivity_report, injectivity_report_with, uniform_times, InjectivityReport,
    ObservationMap, ObservationRoute, ObservationSetup, Verdict,
};

use crate::solver::SolverError;
use crate::spectral::SpectralError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UniquenessError {
    #[error("observation subdomain is empty")]
    EmptySubdomain,
    #[error("node {index} outside 0..{dof}")]
    IndexOutOfRange { index: usize, dof: usize },
    #[error("invalid sample times: {0}")]
    InvalidTimes(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no resolvent samples given")]
    EmptySamples,
    #[error("observation map is identically zero")]
    ZeroMap,
    #[error("invalid probe: {0}")]
    InvalidProbe(String),
    #[error("invalid regularisation: {0}")]
    InvalidRegularization(String),
    #[error("non-finite values")]
    NonFinite,
    #[error("forward solve failed{}: {source}", column.map(|c| format!(" for column {c}")).unwrap_or_default())]
    ForwardSolve { column: Option<usize>, source: SolverError },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}
