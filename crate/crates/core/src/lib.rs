//! Numerical laboratory for the time-fractional wave equation
//! `d_t^alpha (u - a - b t) = -A u`, `1 < alpha < 2`, with a non-symmetric
//! elliptic operator `A` and homogeneous Dirichlet data.

pub mod fraccalc;
pub mod elliptic;
pub mod spectral;
pub mod solver;
pub mod uniqueness;
pub mod acceptance;
