//! Bromwich inversion of `u^(p) = (p^alpha + A)^{-1} (p^(alpha-1) a + p^(alpha-2) b)`
//! on a cotangent (Talbot) contour.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{Route, SolutionField, SourcePair};
use super::SolverError;
use crate::fraccalc::FractionalOrder;

type CMatrix = DMatrix<Complex64>;

/// Contour `p(th) = r th (cot th + i)`, `th` in `(-pi, pi)`, sampled at the
/// midpoints `th_j = (j + 1/2) pi / M` of the upper half; conjugate symmetry
/// supplies the lower half. The scale is `r = factor * min(M, cap) / t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TalbotContour {
    pub nodes: usize,
    pub scale_factor: f64,
    /// Node count beyond which the scale stops growing. Larger scales amplify
    /// rounding by `e^(r t)` without improving the quadrature.
    pub scale_cap: f64,
}

impl Default for TalbotContour {
    fn default() -> Self {
        Self::new(48)
    }
}

impl TalbotContour {
    pub fn new(nodes: usize) -> Self {
        Self {
            nodes,
            scale_factor: 0.5,
            scale_cap: 32.0,
        }
    }

    pub fn scale(&self, t: f64) -> f64 {
        self.scale_factor * (self.nodes as f64).min(self.scale_cap) / t
    }

    /// `(p_j, w_j)` with `u(t) ~ sum_j Im[e^(p_j t) u^(p_j) w_j]`.
    pub fn points(&self, t: f64) -> Vec<(Complex64, Complex64)> {
        let r = self.scale(t);
        let m = self.nodes as f64;
        (0..self.nodes)
            .map(|j| {
                let th = (j as f64 + 0.5) * PI / m;
                let cot = th.cos() / th.sin();
                let p = Complex64::new(r * th * cot, r * th);
                let dp = Complex64::new(r * (cot - th / (th.sin() * th.sin())), r);
                (p, dp / m)
            })
            .collect()
    }

    fn validate(&self) -> Result<(), SolverError> {
        if self.nodes < 2 || !(self.scale_factor > 0.0) || !(self.scale_cap >= 1.0) {
            return Err(SolverError::Shape(format!("invalid contour {self:?}")));
        }
        Ok(())
    }
}

fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Solves `(p^alpha I + A) X = p^(alpha-1) a + p^(alpha-2) b` for complex `p`.
fn laplace_solve(
    ac: &CMatrix,
    alpha: f64,
    p: Complex64,
    a: &CMatrix,
    b: &CMatrix,
) -> Result<CMatrix, SolverError> {
    let n = ac.nrows();
    let pa = p.powf(alpha);
    let m = ac + CMatrix::identity(n, n) * pa;
    let lu = m.lu();
    let diag = lu.u().diagonal();
    let dmax = diag.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let dmin = diag.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if !(dmin > 1e-14 * dmax) {
        return Err(SolverError::ContourCollision { p, pivot_ratio: dmin / dmax });
    }
    let rhs = a * p.powf(alpha - 1.0) + b * p.powf(alpha - 2.0);
    lu.solve(&rhs).ok_or(SolverError::ContourCollision { p, pivot_ratio: 0.0 })
}

/// Laplace transform `u^(p)` of the exact solution for a single source pair.
pub fn transformed_solution(
    a_op: &DMatrix<f64>,
    s: &SourcePair,
    alpha: FractionalOrder,
    p: Complex64,
) -> Result<DVector<Complex64>, SolverError> {
    super::check_wave(alpha)?;
    let n = s.len();
    if a_op.nrows() != n || a_op.ncols() != n {
        return Err(SolverError::Shape(format!("operator {}x{} vs {n} unknowns", a_op.nrows(), a_op.ncols())));
    }
    let a = to_complex(&DMatrix::from_column_slice(n, 1, s.a.as_slice()));
    let b = to_complex(&DMatrix::from_column_slice(n, 1, s.b.as_slice()));
    let x = laplace_solve(&to_complex(a_op), alpha.value(), p, &a, &b)?;
    Ok(x.column(0).into_owned())
}

/// Propagates `R` source pairs (`N x R` each) to every requested time.
pub fn resolvent_propagate(
    a_op: &DMatrix<f64>,
    alpha: FractionalOrder,
    times: &[f64],
    contour: &TalbotContour,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<Vec<DMatrix<f64>>, SolverError> {
    super::check_wave(alpha)?;
    contour.validate()?;
    let n = a_op.nrows();
    if a_op.ncols() != n || a.nrows() != n || b.nrows() != n || a.ncols() != b.ncols() {
        return Err(SolverError::Shape("operator and source shapes disagree".into()));
    }
    if let Some(&t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(SolverError::InvalidTime(t));
    }
    let ac = to_complex(a_op);
    let (ca, cb) = (to_complex(a), to_complex(b));
    times
        .par_iter()
        .map(|&t| {
            let terms: Vec<Result<DMatrix<f64>, SolverError>> = contour
                .points(t)
                .into_par_iter()
                .map(|(p, w)| {
                    let x = laplace_solve(&ac, alpha.value(), p, &ca, &cb)?;
                    let f = (p * t).exp() * w;
                    Ok(x.map(|v| (v * f).im))
                })
                .collect();
            let mut u = DMatrix::zeros(n, a.ncols());
            for term in terms {
                u += term?;
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::NonFinite(format!("resolvent route at t = {t}")));
            }
            Ok(u)
        })
        .collect()
}

/// Resolvent route for a single source pair at the given positive times.
pub fn solve_resolvent(
    a_op: &DMatrix<f64>,
    s: &SourcePair,
    alpha: FractionalOrder,
    times: &[f64],
    contour: &TalbotContour,
) -> Result<SolutionField, SolverError> {
    let n = s.len();
    let a = DMatrix::from_column_slice(n, 1, s.a.as_slice());
    let b = DMatrix::from_column_slice(n, 1, s.b.as_slice());
    let blocks = resolvent_propagate(a_op, alpha, times, contour, &a, &b)?;
    let mut parameters = BTreeMap::new();
    parameters.insert("contour".into(), "talbot".into());
    parameters.insert("nodes".into(), contour.nodes.into());
    parameters.insert("scale_factor".into(), contour.scale_factor.into());
    parameters.insert("scale_cap".into(), contour.scale_cap.into());
    parameters.insert(
        "scales".into(),
        serde_json::Value::from(times.iter().map(|&t| contour.scale(t)).collect::<Vec<f64>>()),
    );
    Ok(SolutionField {
        alpha: alpha.value(),
        route: Route::Resolvent,
        times: times.to_vec(),
        states: blocks.into_iter().map(|m| DVector::from_column_slice(m.as_slice())).collect(),
        grid: None,
        parameters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::mittag_leffler_real;

    fn scalar(l: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, l)
    }

    fn pair(a: f64, b: f64) -> SourcePair {
        SourcePair::new(DVector::from_element(1, a), DVector::from_element(1, b)).unwrap()
    }

    fn order(a: f64) -> FractionalOrder {
        FractionalOrder::wave(a).unwrap()
    }

    #[test]
    fn scalar_displacement_mode() {
        let u = solve_resolvent(&scalar(1.0), &pair(1.0, 0.0), order(1.5), &[1.0], &TalbotContour::default()).unwrap();
        let exact = mittag_leffler_real(1.5, 1.0, -1.0).unwrap();
        assert!((u.states[0][0] - exact).abs() < 1e-9);
    }

    #[test]
    fn scalar_velocity_mode() {
        for t in [0.3, 1.0, 2.5] {
            let u = solve_resolvent(&scalar(1.0), &pair(0.0, 1.0), order(1.5), &[t], &TalbotContour::default()).unwrap();
            let exact = t * mittag_leffler_real(1.5, 2.0, -t.powf(1.5)).unwrap();
            assert!((u.states[0][0] - exact).abs() < 1e-9, "{t}");
        }
    }

    #[test]
    fn zero_data_zero_solution() {
        let a_op = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let u = solve_resolvent(&a_op, &SourcePair::zeros(2), order(1.3), &[0.5, 1.0], &TalbotContour::default()).unwrap();
        assert!(u.states.iter().all(|s| s.amax() == 0.0));
    }

    #[test]
    fn node_doubling_improves_accuracy() {
        let exact = mittag_leffler_real(1.5, 1.0, -4.0).unwrap();
        let mut errs = Vec::new();
        for m in [8usize, 16, 32] {
            let u = solve_resolvent(&scalar(4.0), &pair(1.0, 0.0), order(1.5), &[1.0], &TalbotContour::new(m)).unwrap();
            errs.push((u.states[0][0] - exact).abs());
        }
        assert!(errs[1] < 0.1 * errs[0] && (errs[2] < 0.1 * errs[1] || errs[2] < 1e-9), "{errs:?}");
    }

    #[test]
    fn transform_matches_scalar_formula() {
        let p = Complex64::new(2.0, 1.0);
        let x = transformed_solution(&scalar(3.0), &pair(1.0, 2.0), order(1.5), p).unwrap();
        let pa = p.powf(1.5);
        let exact = (p.powf(0.5) + p.powf(-0.5) * 2.0) / (pa + 3.0);
        assert!((x[0] - exact).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_positive_times() {
        assert!(matches!(
            solve_resolvent(&scalar(1.0), &pair(1.0, 0.0), order(1.5), &[0.0], &TalbotContour::default()),
            Err(SolverError::InvalidTime(_))
        ));
    }

    #[test]
    fn scale_is_capped() {
        let c = TalbotContour::new(48);
        assert!((c.scale(2.0) - 8.0).abs() < 1e-15);
        assert!((TalbotContour::new(16).scale(1.0) - 8.0).abs() < 1e-15);
    }
}
