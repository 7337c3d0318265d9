//! Discrete fractional calculus on uniform time grids.

mod grid;
mod laplace;
mod mittag_leffler;
mod quadrature;

use num_complex::Complex64;

pub use grid::{FractionalOrder, Sample, TimeGrid, TimeSeries};
pub use laplace::{laplace_numeric, LaplaceValue};
pub use mittag_leffler::{mittag_leffler, mittag_leffler_real, rgamma, SERIES_RADIUS, TARGET_ACCURACY};
pub use quadrature::{caputo_derivative, rl_integral, RlWeights};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FracError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("time series live on different grids")]
    GridMismatch,
    #[error("fractional order {alpha} outside {range}")]
    OrderOutOfRange { alpha: f64, range: &'static str },
    #[error("input contains non-finite samples")]
    NonFinite,
    #[error("Laplace argument {0} must have positive real part")]
    InvalidLaplaceArgument(Complex64),
    #[error("Mittag-Leffler evaluation failed: {0}")]
    MittagLeffler(String),
}
