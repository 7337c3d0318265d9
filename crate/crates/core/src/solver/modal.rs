//! Mode-sum solution for diagonalisable operators:
//! `u(t) = sum_n [E_{alpha,1}(-l_n t^alpha) P_n a + t E_{alpha,2}(-l_n t^alpha) P_n b]`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::field::{Route, SolutionField, SourcePair};
use super::SolverError;
use crate::fraccalc::{mittag_leffler, FractionalOrder};
use crate::spectral::{max_abs, RieszData};

/// Relative size of `D_n` above which a cluster counts as defective.
pub const DEFECT_TOL: f64 = 1e-8;

fn check_diagonalisable(data: &[RieszData]) -> Result<(), SolverError> {
    if data.is_empty() {
        return Err(SolverError::Shape("no spectral data".into()));
    }
    for d in data {
        let size = max_abs(&d.d);
        if size > DEFECT_TOL * (1.0 + d.lambda.norm()) {
            return Err(SolverError::DefectiveCluster {
                lambda: d.lambda,
                nilpotent_size: size,
            });
        }
    }
    Ok(())
}

/// Mittag-Leffler factors `(E_{a,1}(-l t^a), t E_{a,2}(-l t^a))` per cluster.
fn mode_factors(alpha: f64, data: &[RieszData], t: f64) -> Result<Vec<(Complex64, Complex64)>, SolverError> {
    data.iter()
        .map(|d| {
            if t == 0.0 {
                return Ok((Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)));
            }
            let z = -d.lambda * t.powf(alpha);
            let e1 = mittag_leffler(alpha, 1.0, z)?;
            let e2 = mittag_leffler(alpha, 2.0, z)?;
            Ok((e1, e2 * t))
        })
        .collect()
}

/// Real `N x N` propagators `(S_a(t), S_b(t))` with `u(t) = S_a a + S_b b`.
pub fn modal_propagators(
    alpha: FractionalOrder,
    data: &[RieszData],
    t: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), SolverError> {
    super::check_wave(alpha)?;
    check_diagonalisable(data)?;
    let n = data[0].p.nrows();
    let factors = mode_factors(alpha.value(), data, t)?;
    let mut sa = DMatrix::<Complex64>::zeros(n, n);
    let mut sb = DMatrix::<Complex64>::zeros(n, n);
    for (d, (e1, e2)) in data.iter().zip(factors) {
        sa += &d.p * e1;
        sb += &d.p * e2;
    }
    Ok((sa.map(|v| v.re), sb.map(|v| v.re)))
}

/// Spectral route for `R` source pairs (`N x R`), at non-negative times.
pub fn modal_propagate(
    alpha: FractionalOrder,
    data: &[RieszData],
    times: &[f64],
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<Vec<DMatrix<f64>>, SolverError> {
    super::check_wave(alpha)?;
    check_diagonalisable(data)?;
    let n = data[0].p.nrows();
    if a.nrows() != n || b.nrows() != n || a.ncols() != b.ncols() {
        return Err(SolverError::Shape("spectral data and source shapes disagree".into()));
    }
    if let Some(&t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(SolverError::InvalidTime(t));
    }
    let ca = a.map(|v| Complex64::new(v, 0.0));
    let cb = b.map(|v| Complex64::new(v, 0.0));
    let pa: Vec<DMatrix<Complex64>> = data.iter().map(|d| &d.p * &ca).collect();
    let pb: Vec<DMatrix<Complex64>> = data.iter().map(|d| &d.p * &cb).collect();
    times
        .par_iter()
        .map(|&t| {
            let factors = mode_factors(alpha.value(), data, t)?;
            let mut u = DMatrix::<Complex64>::zeros(n, a.ncols());
            for ((xa, xb), (e1, e2)) in pa.iter().zip(&pb).zip(factors) {
                u += xa * e1 + xb * e2;
            }
            Ok(u.map(|v| v.re))
        })
        .collect()
}

/// Spectral route for a single source pair. Refuses defective clusters.
pub fn solve_spectral_oracle(
    data: &[RieszData],
    s: &SourcePair,
    alpha: FractionalOrder,
    times: &[f64],
) -> Result<SolutionField, SolverError> {
    let n = s.len();
    let a = DMatrix::from_column_slice(n, 1, s.a.as_slice());
    let b = DMatrix::from_column_slice(n, 1, s.b.as_slice());
    let blocks = modal_propagate(alpha, data, times, &a, &b)?;
    let mut parameters = BTreeMap::new();
    parameters.insert("clusters".into(), data.len().into());
    parameters.insert("contour_nodes".into(), data[0].nodes.into());
    parameters.insert(
        "radii".into(),
        serde_json::Value::from(data.iter().map(|d| d.radius).collect::<Vec<f64>>()),
    );
    Ok(SolutionField {
        alpha: alpha.value(),
        route: Route::Spectral,
        times: times.to_vec(),
        states: blocks.into_iter().map(|m| DVector::from_column_slice(m.as_slice())).collect(),
        grid: None,
        parameters,
    })
}
