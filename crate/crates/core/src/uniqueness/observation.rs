use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::UniquenessError;
use crate::fraccalc::{FractionalOrder, TimeGrid};
use crate::solver::{
    modal_propagate, resolvent_propagate, timestep_propagate, SolverError, TalbotContour,
};
use crate::spectral::{eigendecompose, riesz_decomposition, DEFAULT_CONTOUR_NODES};

/// Forward solver used to build the observation map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "lowercase")]
pub enum ObservationRoute {
    /// Uniform grid on `[0, max time]`; off-grid samples are interpolated linearly.
    Timestep { steps: usize },
    Resolvent { contour: TalbotContour },
    Spectral {
        cluster_tol: Option<f64>,
        contour_nodes: usize,
    },
}

impl Default for ObservationRoute {
    fn default() -> Self {
        ObservationRoute::Spectral {
            cluster_tol: None,
            contour_nodes: DEFAULT_CONTOUR_NODES,
        }
    }
}

/// Observed nodes `omega`, sample times and the forward route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSetup {
    omega: Vec<usize>,
    times: Vec<f64>,
    pub route: ObservationRoute,
}

impl ObservationSetup {
    pub fn new(omega: Vec<usize>, times: Vec<f64>, route: ObservationRoute) -> Result<Self, UniquenessError> {
        if omega.is_empty() {
            return Err(UniquenessError::EmptySubdomain);
        }
        if times.is_empty() {
            return Err(UniquenessError::InvalidTimes("no sample times".into()));
        }
        if !(times[0].is_finite() && times[0] > 0.0) {
            return Err(UniquenessError::InvalidTimes(format!("first time {} is not positive", times[0])));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0] && w[1].is_finite())) {
            return Err(UniquenessError::InvalidTimes(format!(
                "times must increase strictly: {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { omega, times, route })
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rows(&self) -> usize {
        self.omega.len() * self.times.len()
    }

    /// Keeps the rows of `u` (one `N`-vector or `N x R` block per time) on `omega`, time-major.
    pub fn restrict(&self, states: &[DMatrix<f64>]) -> DMatrix<f64> {
        let cols = states[0].ncols();
        let mut out = DMatrix::zeros(self.rows(), cols);
        for (k, s) in states.iter().enumerate() {
            for (i, &node) in self.omega.iter().enumerate() {
                out.row_mut(k * self.omega.len() + i).copy_from(&s.row(node));
            }
        }
        out
    }
}

/// `n_t` evenly spaced times `T/n_t, 2T/n_t, ..., T`.
pub fn uniform_times(final_time: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| final_time * k as f64 / count as f64).collect()
}

/// Matrix of `(a, b) -> u` restricted to `omega x times`.
///
/// Rows are time-major (`row = k |omega| + i`); columns are the unit `a`-sources
/// `e_1..e_N` followed by the unit `b`-sources.
#[derive(Debug, Clone)]
pub struct ObservationMap {
    pub matrix: DMatrix<f64>,
    /// `sigma_1 >= ... >= sigma_2N`, zero-padded when there are fewer rows than columns.
    pub singular_values: Vec<f64>,
    pub dof: usize,
    pub setup: ObservationSetup,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl ObservationMap {
    /// `M x` for a stacked source `x = (a, b)`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    /// Writes `index,sigma,relative`.
    pub fn write_singular_values_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["index", "sigma", "relative"])?;
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        for (i, &s) in self.singular_values.iter().enumerate() {
            let rel = if top > 0.0 { s / top } else { 0.0 };
            w.serialize((i + 1, s, rel))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn propagate(
    a_op: &DMatrix<f64>,
    alpha: FractionalOrder,
    setup: &ObservationSetup,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<Vec<DMatrix<f64>>, SolverError> {
    let times = setup.times();
    match setup.route {
        ObservationRoute::Timestep { steps } => {
            let grid = TimeGrid::new(*times.last().unwrap(), steps)?;
            let states = timestep_propagate(a_op, alpha, grid, a, b)?;
            Ok(times
                .iter()
                .map(|&t| {
                    let (k, th) = grid.locate(t);
                    &states[k] * (1.0 - th) + &states[k + 1] * th
                })
                .collect())
        }
        ObservationRoute::Resolvent { contour } => resolvent_propagate(a_op, alpha, times, &contour, a, b),
        ObservationRoute::Spectral {
            cluster_tol,
            contour_nodes,
        } => {
            let eig = eigendecompose(a_op, cluster_tol)?;
            let data = riesz_decomposition(a_op, &eig, contour_nodes)?;
            modal_propagate(alpha, &data, times, a, b)
        }
    }
}

/// Builds the observation map from `2N` forward solves, then its SVD.
pub fn build_observation_map(
    a_op: &DMatrix<f64>,
    alpha: FractionalOrder,
    setup: &ObservationSetup,
) -> Result<ObservationMap, UniquenessError> {
    let n = a_op.nrows();
    if a_op.ncols() != n {
        return Err(UniquenessError::Shape(format!("operator is {}x{}", n, a_op.ncols())));
    }
    if let Some(&bad) = setup.omega().iter().find(|&&i| i >= n) {
        return Err(UniquenessError::IndexOutOfRange { index: bad, dof: n });
    }
    let mut a = DMatrix::zeros(n, 2 * n);
    let mut b = DMatrix::zeros(n, 2 * n);
    for i in 0..n {
        a[(i, i)] = 1.0;
        b[(i, n + i)] = 1.0;
    }
    let states = match propagate(a_op, alpha, setup, &a, &b) {
        Ok(s) => s,
        Err(err) => return Err(locate_failure(a_op, alpha, setup, &a, &b, err)),
    };
    let matrix = setup.restrict(&states);
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(UniquenessError::NonFinite);
    }
    let singular_values = sorted_singular_values(&matrix);
    let mut metadata = BTreeMap::new();
    metadata.insert("alpha".into(), alpha.value().into());
    metadata.insert("dof".into(), n.into());
    metadata.insert("rows".into(), matrix.nrows().into());
    metadata.insert("columns".into(), "a_1..a_N then b_1..b_N".into());
    metadata.insert("row_order".into(), "time-major".into());
    metadata.insert("route".into(), serde_json::to_value(setup.route).unwrap_or_default());
    Ok(ObservationMap {
        matrix,
        singular_values,
        dof: n,
        setup: setup.clone(),
        metadata,
    })
}

// Re-solves column by column to report which source failed.
fn locate_failure(
    a_op: &DMatrix<f64>,
    alpha: FractionalOrder,
    setup: &ObservationSetup,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    err: SolverError,
) -> UniquenessError {
    let column = (0..a.ncols()).into_par_iter().find_first(|&j| {
        let aj = a.columns(j, 1).into_owned();
        let bj = b.columns(j, 1).into_owned();
        propagate(a_op, alpha, setup, &aj, &bj).is_err()
    });
    UniquenessError::ForwardSolve { column, source: err }
}

/// Singular values in decreasing order, padded with zeros to the column count.
pub(crate) fn sorted_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv.resize(m.ncols(), 0.0);
    sv
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectivityReport {
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// `sigma_min / sigma_max`.
    pub ratio: f64,
    pub condition: f64,
    pub rank: usize,
    pub expected_rank: usize,
    /// Singular values at or below this count as zero.
    pub threshold: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Injective,
    RankDeficient,
}

/// Rank report with the default threshold `sigma_1 max(m, n) eps`.
pub fn injectivity_report(map: &ObservationMap) -> InjectivityReport {
    let (m, n) = map.matrix.shape();
    injectivity_report_with(map, m.max(n) as f64 * f64::EPSILON)
}

/// Rank report counting singular values above `rel_tol * sigma_1`.
pub fn injectivity_report_with(map: &ObservationMap, rel_tol: f64) -> InjectivityReport {
    let sv = &map.singular_values;
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    let threshold = rel_tol * sigma_max;
    let rank = if sigma_max > 0.0 { sv.iter().filter(|&&s| s > threshold).count() } else { 0 };
    let expected_rank = 2 * map.dof;
    InjectivityReport {
        sigma_max,
        sigma_min,
        ratio: if sigma_max > 0.0 { sigma_min / sigma_max } else { 0.0 },
        condition: if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY },
        rank,
        expected_rank,
        threshold,
        verdict: if rank == expected_rank { Verdict::Injective } else { Verdict::RankDeficient },
    }
}
