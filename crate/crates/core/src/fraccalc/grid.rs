use std::io::Write;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use num_traits::Zero;

use super::FracError;

/// Uniform temporal mesh `t_k = k * T / K`, `k = 0..=K`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimeGrid {
    final_time: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(final_time: f64, steps: usize) -> Result<Self, FracError> {
        if !(final_time.is_finite() && final_time > 0.0) {
            return Err(FracError::InvalidGrid(format!(
                "final time must be positive and finite, got {final_time}"
            )));
        }
        if steps < 2 {
            return Err(FracError::InvalidGrid(format!(
                "at least 2 steps are required, got {steps}"
            )));
        }
        Ok(Self { final_time, steps })
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    /// Number of steps `K`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes, `K + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    /// Node `t_k`. The last node is exactly `T`.
    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.final_time
        } else {
            k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.node(k))
    }

    /// Returns `(k, theta)` with `t = (1 - theta) t_k + theta t_{k+1}`; `t` is clamped to `[0, T]`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let s = (t / self.step()).clamp(0.0, self.steps as f64);
        let k = (s.floor() as usize).min(self.steps - 1);
        (k, s - k as f64)
    }
}

/// Scalar sample type carried by a [`TimeSeries`].
pub trait Sample:
    Copy
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + Send
    + Sync
    + std::fmt::Debug
    + 'static
{
    fn modulus(self) -> f64;
    fn is_finite_sample(self) -> bool;
    fn to_complex(self) -> Complex64;
    fn csv_columns() -> &'static [&'static str];
    fn csv_fields(self) -> Vec<f64>;
}

impl Sample for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite_sample(self) -> bool {
        self.is_finite()
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn csv_columns() -> &'static [&'static str] {
        &["value"]
    }
    fn csv_fields(self) -> Vec<f64> {
        vec![self]
    }
}

impl Sample for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite_sample(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn csv_columns() -> &'static [&'static str] {
        &["value_re", "value_im"]
    }
    fn csv_fields(self) -> Vec<f64> {
        vec![self.re, self.im]
    }
}

/// Signal sampled on every node of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T = f64> {
    grid: TimeGrid,
    values: Vec<T>,
}

impl<T: Sample> TimeSeries<T> {
    pub fn new(grid: TimeGrid, values: Vec<T>) -> Result<Self, FracError> {
        if values.len() != grid.len() {
            return Err(FracError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> T) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite_sample())
    }

    /// Pointwise `self * s + other * r`; grids must match.
    pub fn combine(&self, s: f64, other: &Self, r: f64) -> Result<Self, FracError> {
        if self.grid != other.grid {
            return Err(FracError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&u, &v)| u * s + v * r)
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    /// Max-norm distance to another series on the same grid.
    pub fn max_distance(&self, other: &Self) -> Result<f64, FracError> {
        if self.grid != other.grid {
            return Err(FracError::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&u, &v)| (u - v).modulus())
            .fold(0.0, f64::max))
    }

    /// Two-column CSV `t,value` (or `t,value_re,value_im` for complex samples).
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t"];
        header.extend_from_slice(T::csv_columns());
        w.write_record(&header)?;
        for (t, v) in self.grid.nodes().zip(&self.values) {
            let mut row = vec![t];
            row.extend(v.csv_fields());
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fractional order `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    /// Any order in `(0, 2]`, the range accepted by the Riemann-Liouville integral.
    pub fn new(alpha: f64) -> Result<Self, FracError> {
        if alpha.is_finite() && alpha > 0.0 && alpha <= 2.0 {
            Ok(Self(alpha))
        } else {
            Err(FracError::OrderOutOfRange {
                alpha,
                range: "(0, 2]",
            })
        }
    }

    /// Order in the open interval `(1, 2)` used by the wave equation.
    pub fn wave(alpha: f64) -> Result<Self, FracError> {
        if alpha.is_finite() && alpha > 1.0 && alpha < 2.0 {
            Ok(Self(alpha))
        } else {
            Err(FracError::OrderOutOfRange {
                alpha,
                range: "(1, 2)",
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_wave(self) -> bool {
        self.0 > 1.0 && self.0 < 2.0
    }
}
