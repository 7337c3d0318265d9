use num_complex::Complex64;

use super::grid::{Sample, TimeSeries};
use super::FracError;

/// Truncated Laplace transform and the size of the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LaplaceValue {
    pub value: Complex64,
    /// `e^(-Re p T) * sup|v|`; the neglected tail is at most this over `Re p`
    /// if `v` stays below its sampled supremum beyond `T`.
    pub truncation_bound: f64,
}

/// Trapezoid approximation of `int_0^T e^(-pt) v(t) dt` for `Re p > 0`.
pub fn laplace_numeric<T: Sample>(v: &TimeSeries<T>, p: Complex64) -> Result<LaplaceValue, FracError> {
    if !(p.re > 0.0) || !p.im.is_finite() || !p.re.is_finite() {
        return Err(FracError::InvalidLaplaceArgument(p));
    }
    if !v.is_finite() {
        return Err(FracError::NonFinite);
    }
    let grid = v.grid();
    let h = grid.step();
    let last = grid.steps();
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, (t, &x)) in grid.nodes().zip(v.values()).enumerate() {
        let w = if k == 0 || k == last { 0.5 } else { 1.0 };
        acc += (-p * t).exp() * x.to_complex() * w;
    }
    Ok(LaplaceValue {
        value: acc * h,
        truncation_bound: (-p.re * grid.final_time()).exp() * v.sup_norm(),
    })
}
