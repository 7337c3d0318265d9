use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::observation::ObservationMap;
use super::UniquenessError;
use crate::solver::SourcePair;

/// Relative Tikhonov weight used when none is given: `lambda = 1e-8 sigma_1^2`.
pub const DEFAULT_TIKHONOV: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Regularization {
    /// Minimises `||M x - d||^2 + lambda ||x||^2`; `lambda = DEFAULT_TIKHONOV sigma_1^2` when unset.
    Tikhonov { lambda: Option<f64> },
    /// Pseudo-inverse on the leading `k` singular triplets.
    TruncatedSvd { k: usize },
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::Tikhonov { lambda: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Recovery {
    #[serde(skip)]
    pub source: SourcePair,
    pub residual_norm: f64,
    /// `||M x - d|| / ||d||`, or the absolute residual when `d = 0`.
    pub relative_residual: f64,
    /// `sigma_1` times the largest gain applied to a singular direction;
    /// `sigma_1 / sigma_min` without regularisation.
    pub effective_condition: f64,
    pub method: &'static str,
    /// Tikhonov `lambda` actually used, or the truncation rank.
    pub parameter: f64,
}

/// Regularised least-squares recovery of `(a, b)` from observed samples.
pub fn invert_source(
    map: &ObservationMap,
    data: &DVector<f64>,
    reg: Regularization,
) -> Result<Recovery, UniquenessError> {
    let m = &map.matrix;
    if data.len() != m.nrows() {
        return Err(UniquenessError::Shape(format!(
            "data has {} samples, the observation map expects {}",
            data.len(),
            m.nrows()
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(UniquenessError::NonFinite);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let sv = &svd.singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Err(UniquenessError::ZeroMap);
    }
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));

    // gain_i multiplies <u_i, d> along v_i
    let (gains, method, parameter): (Vec<(usize, f64)>, _, _) = match reg {
        Regularization::Tikhonov { lambda } => {
            let lambda = lambda.unwrap_or(DEFAULT_TIKHONOV * top * top);
            if !(lambda.is_finite() && lambda >= 0.0) {
                return Err(UniquenessError::InvalidRegularization(format!("lambda = {lambda}")));
            }
            let g = order
                .iter()
                .filter(|&&i| sv[i] > 0.0)
                .map(|&i| (i, sv[i] / (sv[i] * sv[i] + lambda)))
                .collect();
            (g, "tikhonov", lambda)
        }
        Regularization::TruncatedSvd { k } => {
            if k == 0 || k > sv.len() {
                return Err(UniquenessError::InvalidRegularization(format!(
                    "truncation rank {k} outside 1..={}",
                    sv.len()
                )));
            }
            let g = order.iter().take(k).filter(|&&i| sv[i] > 0.0).map(|&i| (i, 1.0 / sv[i])).collect();
            (g, "truncated-svd", k as f64)
        }
    };
    let mut x = DVector::zeros(m.ncols());
    for &(i, gain) in &gains {
        let coeff = u.column(i).dot(data) * gain;
        x += v_t.row(i).transpose() * coeff;
    }
    let effective_condition = top * gains.iter().map(|&(_, g)| g).fold(0.0, f64::max);
    let residual_norm = (m * &x - data).norm();
    let dn = data.norm();
    Ok(Recovery {
        source: SourcePair::from_stacked(&x).map_err(|e| UniquenessError::Shape(e.to_string()))?,
        residual_norm,
        relative_residual: if dn > 0.0 { residual_norm / dn } else { residual_norm },
        effective_condition,
        method,
        parameter,
    })
}

/// Adds Gaussian noise of standard deviation `level * max|data|` from a seeded stream.
pub fn add_noise(data: &DVector<f64>, level: f64, seed: u64) -> DVector<f64> {
    let sigma = level * data.amax();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    data.map(|v| {
        let e: f64 = StandardNormal.sample(&mut rng);
        v + sigma * e
    })
}

/// Relative error `||x_hat - x|| / ||x||` of the stacked source.
pub fn relative_error(truth: &SourcePair, estimate: &SourcePair) -> f64 {
    let t = truth.stacked();
    let d = (estimate.stacked() - &t).norm();
    if t.norm() > 0.0 {
        d / t.norm()
    } else {
        d
    }
}

/// Writes `node,a_true,b_true,a_rec,b_rec,a_err,b_err`.
pub fn write_recovery_csv<W: Write>(w: W, truth: &SourcePair, rec: &SourcePair) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["node", "a_true", "b_true", "a_rec", "b_rec", "a_err", "b_err"])?;
    for i in 0..truth.len() {
        w.serialize((
            i,
            truth.a[i],
            truth.b[i],
            rec.a[i],
            rec.b[i],
            rec.a[i] - truth.a[i],
            rec.b[i] - truth.b[i],
        ))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::FractionalOrder;
    use crate::uniqueness::{build_observation_map, uniform_times, ObservationRoute, ObservationSetup};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn advection(n: usize) -> DMatrix<f64> {
        let h = 1.0 / (n + 1) as f64;
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0 / (h * h)
            } else if j == i + 1 {
                -1.0 / (h * h) - 0.5 / h
            } else if i == j + 1 {
                -1.0 / (h * h) + 0.5 / h
            } else {
                0.0
            }
        })
    }

    fn full_map(n: usize) -> ObservationMap {
        let setup = ObservationSetup::new((0..n).collect(), uniform_times(1.0, 3), ObservationRoute::default()).unwrap();
        build_observation_map(&advection(n), FractionalOrder::wave(1.5).unwrap(), &setup).unwrap()
    }

    fn truth(n: usize) -> SourcePair {
        let h = 1.0 / (n + 1) as f64;
        SourcePair::new(
            DVector::from_fn(n, |i, _| (std::f64::consts::PI * (i + 1) as f64 * h).sin()),
            DVector::from_fn(n, |i, _| (i + 1) as f64 * h * (1.0 - (i + 1) as f64 * h)),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_full_observation_recovers_source() {
        let map = full_map(6);
        let s = truth(6);
        let data = map.apply(&s.stacked());
        let rec = invert_source(&map, &data, Regularization::Tikhonov { lambda: Some(1e-14 * map.singular_values[0].powi(2)) }).unwrap();
        assert!(relative_error(&s, &rec.source) < 1e-6, "{}", relative_error(&s, &rec.source));
        let tsvd = invert_source(&map, &data, Regularization::TruncatedSvd { k: 12 }).unwrap();
        assert!(relative_error(&s, &tsvd.source) < 1e-6);
    }

    #[test]
    fn zero_data_gives_zero_source() {
        let map = full_map(4);
        let rec = invert_source(&map, &DVector::zeros(map.matrix.nrows()), Regularization::default()).unwrap();
        assert_eq!(rec.source.stacked().amax(), 0.0);
        assert_eq!(rec.residual_norm, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let map = full_map(3);
        assert!(matches!(invert_source(&map, &DVector::zeros(2), Regularization::default()), Err(UniquenessError::Shape(_))));
        let rows = map.matrix.nrows();
        assert!(invert_source(&map, &DVector::zeros(rows), Regularization::TruncatedSvd { k: 0 }).is_err());
        assert!(invert_source(&map, &DVector::zeros(rows), Regularization::Tikhonov { lambda: Some(-1.0) }).is_err());
        let mut zero = map.clone();
        zero.matrix.fill(0.0);
        assert!(matches!(invert_source(&zero, &DVector::zeros(rows), Regularization::default()), Err(UniquenessError::ZeroMap)));
    }

    #[test]
    fn truncation_matches_pseudo_inverse_on_rank_deficient_map() {
        let mut map = full_map(3);
        map.matrix = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let d = DVector::from_vec(vec![2.0, 5.0]);
        let rec = invert_source(&map, &d, Regularization::TruncatedSvd { k: 1 }).unwrap();
        assert!((rec.source.a[0] - 2.0).abs() < 1e-15 && rec.source.b[0] == 0.0);
        assert!((rec.residual_norm - 5.0).abs() < 1e-15);
    }

    #[test]
    fn noise_is_reproducible_and_scaled() {
        let d = DVector::from_fn(500, |i, _| (i as f64 * 0.1).sin());
        let a = add_noise(&d, 0.01, 11);
        assert_eq!(a, add_noise(&d, 0.01, 11));
        assert_ne!(a, add_noise(&d, 0.01, 12));
        let diff = &a - &d;
        let rms = (diff.norm_squared() / 500.0).sqrt();
        assert!((rms - 0.01 * d.amax()).abs() < 0.002 * d.amax());
        assert_eq!(add_noise(&d, 0.0, 3), d);
    }

    #[test]
    fn recovery_csv_columns() {
        let s = truth(3);
        let mut buf = Vec::new();
        write_recovery_csv(&mut buf, &s, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("node,a_true,b_true,a_rec,b_rec,a_err,b_err"));
        assert_eq!(text.lines().count(), 4);
    }

    proptest! {
        #[test]
        fn recovery_is_linear_in_data(c in -2.0f64..2.0, seed in 0u64..1000) {
            let map = full_map(4);
            let ones = DVector::from_element(map.matrix.nrows(), 1.0);
            let d1 = add_noise(&ones, 0.5, seed);
            let d2 = add_noise(&ones, 2.0, seed + 1);
            let reg = Regularization::default();
            let x1 = invert_source(&map, &d1, reg).unwrap().source.stacked();
            let x2 = invert_source(&map, &d2, reg).unwrap().source.stacked();
            let x12 = invert_source(&map, &(&d1 * c + &d2), reg).unwrap().source.stacked();
            prop_assert!((&x12 - (x1 * c + x2)).amax() < 1e-9 * (1.0 + x12.amax()));
        }
    }
}
