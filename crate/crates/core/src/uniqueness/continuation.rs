//! Discrete shadows of the unique-continuation argument: the stacked map
//! `a -> [(A - z_k)^{-1} a]|_omega` and the projection cascade
//! `D^l P a|_omega = 0  =>  P a = 0`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::UniquenessError;
use crate::spectral::{resolvent, to_complex, CMatrix, RieszData};

/// `count` Chebyshev points of the first kind on the real segment `[lo, hi]`.
pub fn chebyshev_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| {
            let x = ((2 * k + 1) as f64 * PI / (2 * count) as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * x
        })
        .collect()
}

/// Chebyshev samples on a real segment left of the spectrum:
/// `[s - 1 - w, s - 1]` with `s = min Re sigma(A)` and `w = max(1, spread of Re sigma(A))`.
pub fn default_samples(eigenvalues: &[Complex64], count: usize) -> Vec<Complex64> {
    let lo = eigenvalues.iter().map(|l| l.re).fold(f64::INFINITY, f64::min);
    let hi = eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
    let width = (hi - lo).max(1.0);
    chebyshev_points(lo - 1.0 - width, lo - 1.0, count)
        .into_iter()
        .map(|x| Complex64::new(x, 0.0))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct VanishingReport {
    pub samples: usize,
    pub rows: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub threshold: f64,
    /// Unit right singular vector of `sigma_min` when it is numerically zero.
    #[serde(skip)]
    pub kernel: Option<DVector<Complex64>>,
}

impl VanishingReport {
    pub fn trivial_kernel(&self) -> bool {
        self.kernel.is_none()
    }
}

/// Stacks `(A - z_k)^{-1}` restricted to `omega` over all samples and reports
/// its smallest singular value. A vanishing `sigma_min` yields a source whose
/// resolvent is zero on `omega` at every sample.
pub fn resolvent_vanishing_check(
    a_op: &DMatrix<f64>,
    omega: &[usize],
    z_samples: &[Complex64],
) -> Result<VanishingReport, UniquenessError> {
    let n = a_op.nrows();
    if z_samples.is_empty() {
        return Err(UniquenessError::EmptySamples);
    }
    if omega.is_empty() {
        return Err(UniquenessError::EmptySubdomain);
    }
    if let Some(&bad) = omega.iter().find(|&&i| i >= n) {
        return Err(UniquenessError::IndexOutOfRange { index: bad, dof: n });
    }
    let ac = to_complex(a_op);
    let blocks: Vec<CMatrix> = z_samples
        .par_iter()
        .map(|&z| resolvent(&ac, z).map(|(r, _)| -r))
        .collect::<Result<_, _>>()?;
    let m = omega.len();
    let rows = m * z_samples.len();
    // zero rows keep the SVD square enough to expose a kernel
    let mut stacked = CMatrix::zeros(rows.max(n), n);
    for (k, r) in blocks.iter().enumerate() {
        for (i, &node) in omega.iter().enumerate() {
            stacked.row_mut(k * m + i).copy_from(&r.row(node));
        }
    }
    let svd = stacked.svd(false, true);
    let sv = &svd.singular_values;
    let (mut imax, mut imin) = (0, 0);
    for i in 0..sv.len() {
        if sv[i] > sv[imax] {
            imax = i;
        }
        if sv[i] < sv[imin] {
            imin = i;
        }
    }
    let sigma_max = sv[imax];
    let sigma_min = sv[imin];
    let threshold = sigma_max * rows.max(n) as f64 * f64::EPSILON;
    let kernel = if sigma_min <= threshold {
        let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
        Some(v_t.row(imin).adjoint())
    } else {
        None
    };
    Ok(VanishingReport {
        samples: z_samples.len(),
        rows,
        sigma_max,
        sigma_min,
        threshold,
        kernel,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterCascade {
    pub lambda: Complex64,
    pub multiplicity: usize,
    /// `||(D^l P a)|_omega||` for `l = 0..d`.
    pub on_omega: Vec<f64>,
    /// `||(A - lambda) D^l P a||` for `l = d-1` down to `0`.
    pub descent: Vec<f64>,
    /// `||P a||` on the whole domain.
    pub projection_norm: f64,
    /// `P a` is invisible on `omega` yet nonzero.
    pub uc_violation: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CascadeReport {
    pub clusters: Vec<ClusterCascade>,
    pub tol: f64,
    pub note: Option<String>,
}

impl CascadeReport {
    pub fn violations(&self) -> usize {
        self.clusters.iter().filter(|c| c.uc_violation).count()
    }
}

fn restricted_norm(v: &DVector<Complex64>, omega: &[usize]) -> f64 {
    omega.iter().map(|&i| v[i].norm_sqr()).sum::<f64>().sqrt()
}

/// Runs the cascade for a given source `a` on every cluster.
///
/// Norms are relative to `||a||`; a cluster is flagged when all `D^l P a`
/// vanish on `omega` to `tol` while `||P a|| > tol`.
pub fn projection_cascade_check(
    a_op: &DMatrix<f64>,
    data: &[RieszData],
    a: &DVector<Complex64>,
    omega: &[usize],
    tol: f64,
) -> Result<CascadeReport, UniquenessError> {
    let n = a_op.nrows();
    if a.len() != n || data.iter().any(|d| d.p.nrows() != n) {
        return Err(UniquenessError::Shape("source, operator and projections disagree".into()));
    }
    if let Some(&bad) = omega.iter().find(|&&i| i >= n) {
        return Err(UniquenessError::IndexOutOfRange { index: bad, dof: n });
    }
    let scale = a.norm();
    if scale == 0.0 {
        let clusters = data
            .iter()
            .map(|d| ClusterCascade {
                lambda: d.lambda,
                multiplicity: d.multiplicity,
                on_omega: vec![0.0; d.multiplicity.max(1)],
                descent: vec![0.0; d.multiplicity.max(1)],
                projection_norm: 0.0,
                uc_violation: false,
            })
            .collect();
        return Ok(CascadeReport {
            clusters,
            tol,
            note: Some("zero source".into()),
        });
    }
    let ac = to_complex(a_op);
    let clusters = data
        .iter()
        .map(|d| {
            let depth = d.multiplicity.max(1);
            let shifted = &ac - CMatrix::identity(n, n) * d.lambda;
            let mut chain = vec![&d.p * a];
            for _ in 1..depth {
                let next = &d.d * chain.last().unwrap();
                chain.push(next);
            }
            let on_omega: Vec<f64> = chain.iter().map(|v| restricted_norm(v, omega) / scale).collect();
            let descent: Vec<f64> = chain.iter().rev().map(|v| (&shifted * v).norm() / scale).collect();
            let projection_norm = chain[0].norm() / scale;
            let hidden = on_omega.iter().all(|&r| r <= tol);
            ClusterCascade {
                lambda: d.lambda,
                multiplicity: d.multiplicity,
                on_omega,
                descent,
                projection_norm,
                uc_violation: hidden && projection_norm > tol,
            }
        })
        .collect();
    Ok(CascadeReport { clusters, tol, note: None })
}

/// Looks for a source whose resolvent vanishes on `omega` at every sample and
/// runs the cascade on it. A trivial kernel is the expected, positive outcome.
pub fn cascade_from_kernel(
    a_op: &DMatrix<f64>,
    data: &[RieszData],
    omega: &[usize],
    z_samples: &[Complex64],
    tol: f64,
) -> Result<(VanishingReport, CascadeReport), UniquenessError> {
    let report = resolvent_vanishing_check(a_op, omega, z_samples)?;
    let cascade = match &report.kernel {
        Some(v) => projection_cascade_check(a_op, data, v, omega, tol)?,
        None => CascadeReport {
            clusters: Vec::new(),
            tol,
            note: Some("no kernel vector exists".into()),
        },
    };
    Ok((report, cascade))
}
