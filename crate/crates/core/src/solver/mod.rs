//! Forward solvers for `d_t^alpha (u - a - b t) = -A u` and probes of their output.
//!
//! Three routes are provided: implicit time stepping, Laplace inversion on a
//! Talbot contour, and a Mittag-Leffler mode sum for diagonalisable `A`.

mod field;
mod modal;
mod probes;
mod resolvent;
mod timestep;

use num_complex::Complex64;

use crate::fraccalc::{FracError, FractionalOrder};
use crate::spectral::SpectralError;

pub use field::{Route, SolutionField, SourcePair};
pub use modal::{modal_propagate, modal_propagators, solve_spectral_oracle, DEFECT_TOL};
pub use probes::{
    growth_probe, laplace_identity_check, CheckStatus, GrowthFit, LaplaceIdentityRow, MIN_GROWTH_HORIZON,
};
pub use resolvent::{resolvent_propagate, solve_resolvent, transformed_solution, TalbotContour};
pub use timestep::{solve_timestep, timestep_propagate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("order {0} outside (1, 2)")]
    NotWave(f64),
    #[error("step matrix is singular")]
    SingularStep,
    #[error("contour node p = {p} hits the generalised spectrum (pivot ratio {pivot_ratio:.3e})")]
    ContourCollision { p: Complex64, pivot_ratio: f64 },
    #[error("output time {0} must be positive and finite")]
    InvalidTime(f64),
    #[error("time {0} not stored in the solution")]
    MissingTime(f64),
    #[error("solution has no uniform time grid")]
    MissingGrid,
    #[error("cluster at {lambda} is defective (|D| = {nilpotent_size:.3e}); the mode sum does not apply")]
    DefectiveCluster { lambda: Complex64, nilpotent_size: f64 },
    #[error("growth probe needs a horizon of at least 5, got {0}")]
    HorizonTooShort(f64),
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub(crate) fn check_wave(alpha: FractionalOrder) -> Result<(), SolverError> {
    if alpha.is_wave() {
        Ok(())
    } else {
        Err(SolverError::NotWave(alpha.value()))
    }
}
