use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::field::{SolutionField, SourcePair};
use super::SolverError;
use crate::fraccalc::{laplace_numeric, FractionalOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The truncated transform cannot resolve the requested tolerance.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplaceIdentityRow {
    pub p: Complex64,
    /// `||p^a U + A U - p^(a-1) a - p^(a-2) b|| / ||p^(a-1) a + p^(a-2) b||`
    pub relative_residual: f64,
    /// Truncation bound of the transform relative to `||U||`.
    pub relative_truncation: f64,
    pub status: CheckStatus,
}

/// Transforms every component of a gridded solution and tests
/// `p^alpha U(p) - p^(alpha-1) a - p^(alpha-2) b = -A U(p)`.
pub fn laplace_identity_check(
    u: &SolutionField,
    s: &SourcePair,
    a_op: &DMatrix<f64>,
    alpha: FractionalOrder,
    p_samples: &[Complex64],
    tol: f64,
) -> Result<Vec<LaplaceIdentityRow>, SolverError> {
    let n = s.len();
    if u.dof() != n || a_op.nrows() != n {
        return Err(SolverError::Shape("solution, data and operator sizes differ".into()));
    }
    let series: Vec<_> = (0..n).map(|i| u.component(i)).collect::<Result<_, _>>()?;
    let ac = a_op.map(|v| Complex64::new(v, 0.0));
    let alpha = alpha.value();
    p_samples
        .iter()
        .map(|&p| {
            let mut lu = DVector::<Complex64>::zeros(n);
            let mut bound: f64 = 0.0;
            for (i, ser) in series.iter().enumerate() {
                let lv = laplace_numeric(ser, p)?;
                lu[i] = lv.value;
                bound = bound.max(lv.truncation_bound);
            }
            let data = s.a.map(|v| Complex64::new(v, 0.0)) * p.powf(alpha - 1.0)
                + s.b.map(|v| Complex64::new(v, 0.0)) * p.powf(alpha - 2.0);
            let residual = &lu * p.powf(alpha) + &ac * &lu - &data;
            let denom = data.norm();
            let relative_residual = if denom > 0.0 { residual.norm() / denom } else { residual.norm() };
            // tail of each component is at most bound / Re p
            let tail = bound * (n as f64).sqrt() / p.re;
            let relative_truncation = if lu.norm() > 0.0 { tail / lu.norm() } else { tail };
            let status = if relative_truncation > tol {
                CheckStatus::Inconclusive
            } else if relative_residual <= tol {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            };
            Ok(LaplaceIdentityRow {
                p,
                relative_residual,
                relative_truncation,
                status,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub c1: f64,
    pub c2: f64,
    /// Largest `log ||u|| - (log c1_ls + c2 t)` before the intercept is lifted.
    pub max_violation: f64,
    pub envelope_points: usize,
    pub degenerate: bool,
}

/// Minimum horizon accepted by [`growth_probe`].
pub const MIN_GROWTH_HORIZON: f64 = 5.0;

/// Fits `||u(t)||_2 <= c1 e^(c2 t)`.
///
/// The slope comes from a least-squares line through the local maxima of
/// `log ||u(t_k)||`; the intercept is then raised until the line covers
/// every sample.
pub fn growth_probe(u: &SolutionField) -> Result<GrowthFit, SolverError> {
    let horizon = u.times.last().copied().unwrap_or(0.0);
    if horizon < MIN_GROWTH_HORIZON {
        return Err(SolverError::HorizonTooShort(horizon));
    }
    let norms = u.norms();
    if norms.iter().all(|&v| v == 0.0) {
        return Ok(GrowthFit {
            c1: 0.0,
            c2: 0.0,
            max_violation: 0.0,
            envelope_points: 0,
            degenerate: true,
        });
    }
    let k = norms.len();
    let peaks: Vec<usize> = (0..k)
        .filter(|&i| {
            norms[i] > 0.0
                && (i == 0 || norms[i] >= norms[i - 1])
                && (i + 1 == k || norms[i] >= norms[i + 1])
        })
        .collect();
    let pts: Vec<usize> = if peaks.len() >= 2 {
        peaks
    } else {
        (0..k).filter(|&i| norms[i] > 0.0).collect()
    };
    let (slope, intercept) = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let tm = pts.iter().map(|&i| u.times[i]).sum::<f64>() / m;
        let ym = pts.iter().map(|&i| norms[i].ln()).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|&i| (u.times[i] - tm) * (norms[i].ln() - ym)).sum();
        let sxx: f64 = pts.iter().map(|&i| (u.times[i] - tm).powi(2)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        (slope, ym - slope * tm)
    } else {
        (0.0, norms[pts[0]].ln())
    };
    let max_violation = (0..k)
        .filter(|&i| norms[i] > 0.0)
        .map(|i| norms[i].ln() - (intercept + slope * u.times[i]))
        .fold(f64::NEG_INFINITY, f64::max);
    let lifted = intercept + max_violation.max(0.0);
    Ok(GrowthFit {
        c1: lifted.exp(),
        c2: slope,
        max_violation: max_violation.max(0.0),
        envelope_points: pts.len(),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::TimeGrid;
    use crate::solver::{solve_timestep, Route};
    use std::collections::BTreeMap;

    fn order(a: f64) -> FractionalOrder {
        FractionalOrder::wave(a).unwrap()
    }

    #[test]
    fn affine_motion_satisfies_identity() {
        let a_op = DMatrix::zeros(2, 2);
        let s = SourcePair::new(DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![0.5, -0.5])).unwrap();
        let u = solve_timestep(&a_op, &s, order(1.5), TimeGrid::new(30.0, 6000).unwrap()).unwrap();
        let p = [Complex64::new(2.0, 0.0), Complex64::new(3.0, 1.0)];
        for row in laplace_identity_check(&u, &s, &a_op, order(1.5), &p, 1e-3).unwrap() {
            assert_eq!(row.status, CheckStatus::Pass, "{row:?}");
            // trapezoid error of the transform is about h^2 |p|^2 / 12
            assert!(row.relative_residual < 0.005f64.powi(2) * row.p.norm_sqr() / 6.0, "{row:?}");
        }
    }

    #[test]
    fn scalar_mode_identity() {
        let a_op = DMatrix::from_element(1, 1, 1.0);
        let s = SourcePair::new(DVector::from_element(1, 1.0), DVector::zeros(1)).unwrap();
        let u = solve_timestep(&a_op, &s, order(1.5), TimeGrid::new(20.0, 2000).unwrap()).unwrap();
        let rows = laplace_identity_check(&u, &s, &a_op, order(1.5), &[Complex64::new(3.0, 0.0)], 1e-2).unwrap();
        assert_eq!(rows[0].status, CheckStatus::Pass, "{:?}", rows[0]);
    }

    #[test]
    fn short_horizon_is_inconclusive() {
        let a_op = DMatrix::from_element(1, 1, 1.0);
        let s = SourcePair::new(DVector::from_element(1, 1.0), DVector::from_element(1, 1.0)).unwrap();
        let u = solve_timestep(&a_op, &s, order(1.5), TimeGrid::new(1.0, 100).unwrap()).unwrap();
        let rows = laplace_identity_check(&u, &s, &a_op, order(1.5), &[Complex64::new(0.5, 0.0)], 1e-2).unwrap();
        assert_eq!(rows[0].status, CheckStatus::Inconclusive);
    }

    fn field(times: Vec<f64>, values: Vec<f64>) -> SolutionField {
        SolutionField {
            alpha: 1.5,
            route: Route::Timestep,
            times,
            states: values.into_iter().map(|v| DVector::from_element(1, v)).collect(),
            grid: None,
            parameters: BTreeMap::new(),
        }
    }

    #[test]
    fn zero_solution_is_degenerate() {
        let f = field((0..=10).map(|k| k as f64).collect(), vec![0.0; 11]);
        let g = growth_probe(&f).unwrap();
        assert!(g.degenerate);
        assert_eq!((g.c1, g.c2), (0.0, 0.0));
    }

    #[test]
    fn recovers_exponential_rate() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let vals = times.iter().map(|t| 2.0 * (0.7 * t).exp() * (1.5 + (3.0 * t).cos())).collect();
        let g = growth_probe(&field(times.clone(), vals)).unwrap();
        assert!((g.c2 - 0.7).abs() < 0.05, "{g:?}");
        for t in times {
            let v = 2.0 * (0.7 * t).exp() * (1.5 + (3.0 * t).cos());
            assert!(v <= g.c1 * (g.c2 * t).exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn requires_long_horizon() {
        let f = field(vec![0.0, 1.0], vec![1.0, 1.0]);
        assert!(matches!(growth_probe(&f), Err(SolverError::HorizonTooShort(_))));
    }

    #[test]
    fn unstable_mode_grows() {
        // -A has the positive eigenvalue 2: E_a(2 t^a) ~ exp(2^(1/a) t) / a
        let a_op = DMatrix::from_element(1, 1, -2.0);
        let s = SourcePair::new(DVector::from_element(1, 1.0), DVector::zeros(1)).unwrap();
        let u = solve_timestep(&a_op, &s, order(1.5), TimeGrid::new(6.0, 600).unwrap()).unwrap();
        let g = growth_probe(&u).unwrap();
        let rate = 2f64.powf(1.0 / 1.5);
        assert!(g.c2 > 0.0 && (g.c2 - rate).abs() < 0.3 * rate, "{g:?}");
    }
}
