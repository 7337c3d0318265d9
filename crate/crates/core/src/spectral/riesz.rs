use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::eigen::{Cluster, Eigensystem};
use super::SpectralError;

/// Default number of trapezoid nodes on each circle.
pub const DEFAULT_CONTOUR_NODES: usize = 64;

pub type CMatrix = DMatrix<Complex64>;

/// Riesz projection `P`, nilpotent part `D` and multiplicity `d` of one cluster.
#[derive(Debug, Clone)]
pub struct RieszData {
    pub lambda: Complex64,
    pub radius: f64,
    pub nodes: usize,
    pub p: CMatrix,
    pub d: CMatrix,
    /// Numerical rank of `P` at `1e-8 * ||P||_2`.
    pub multiplicity: usize,
    /// Smallest `1 / ||(z - A)^{-1}||_1` over the contour nodes.
    pub min_resolvent_distance: f64,
}

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|v| Complex64::new(v, 0.0))
}

/// Max-abs entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Numerical rank at `rel_tol` times the largest singular value.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// `(z I - A)^{-1}`, refusing nodes where the resolvent blows up.
pub fn resolvent(a: &CMatrix, z: Complex64) -> Result<(CMatrix, f64), SpectralError> {
    let n = a.nrows();
    let shifted = CMatrix::identity(n, n) * z - a;
    let scale = one_norm(a) + z.norm();
    let inv = shifted
        .lu()
        .try_inverse()
        .ok_or(SpectralError::NearSingular { z, distance: 0.0 })?;
    let distance = 1.0 / one_norm(&inv);
    if !(distance > 1e-13 * scale) {
        return Err(SpectralError::NearSingular { z, distance });
    }
    Ok((inv, distance))
}

/// Trapezoid rule on `|z - lambda| = radius` for
/// `P = 1/(2 pi i) int (z - A)^{-1} dz` and `D = 1/(2 pi i) int (z - lambda)(z - A)^{-1} dz`.
///
/// Node solves run in parallel; the sum is taken in node order.
pub fn riesz_projection(
    a: &DMatrix<f64>,
    lambda: Complex64,
    radius: f64,
    nodes: usize,
) -> Result<RieszData, SpectralError> {
    if !(radius.is_finite() && radius > 0.0) || nodes < 3 {
        return Err(SpectralError::Shape(format!(
            "contour needs a positive radius and at least 3 nodes (radius {radius}, nodes {nodes})"
        )));
    }
    let n = a.nrows();
    let ac = to_complex(a);
    let terms: Vec<Result<(CMatrix, CMatrix, f64), SpectralError>> = (0..nodes)
        .into_par_iter()
        .map(|m| {
            let e = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / nodes as f64);
            let z = lambda + e * radius;
            let (r, dist) = resolvent(&ac, z)?;
            // dz / (2 pi i) = radius e dtheta / (2 pi)
            let wp = e * radius;
            let wd = e * e * radius * radius;
            Ok((&r * wp, r * wd, dist))
        })
        .collect();

    let mut p = CMatrix::zeros(n, n);
    let mut d = CMatrix::zeros(n, n);
    let mut min_dist = f64::INFINITY;
    for t in terms {
        let (tp, td, dist) = t?;
        p += tp;
        d += td;
        min_dist = min_dist.min(dist);
    }
    let inv_m = 1.0 / nodes as f64;
    p *= Complex64::new(inv_m, 0.0);
    d *= Complex64::new(inv_m, 0.0);
    let multiplicity = numerical_rank(&p, 1e-8);
    Ok(RieszData {
        lambda,
        radius,
        nodes,
        p,
        d,
        multiplicity,
        min_resolvent_distance: min_dist,
    })
}

/// Checks that the circle of `cluster` holds its members and no other eigenvalue.
pub fn check_enclosure(eig: &Eigensystem, cluster: &Cluster) -> Result<(), SpectralError> {
    let inside = eig
        .eigenvalues
        .iter()
        .filter(|z| (*z - cluster.lambda).norm() < cluster.radius)
        .count();
    if inside != cluster.multiplicity || cluster.spread() >= cluster.radius {
        return Err(SpectralError::Enclosure {
            lambda: cluster.lambda,
            radius: cluster.radius,
            inside,
            expected: cluster.multiplicity,
        });
    }
    Ok(())
}

/// Riesz data for every cluster of `eig`.
pub fn riesz_decomposition(a: &DMatrix<f64>, eig: &Eigensystem, nodes: usize) -> Result<Vec<RieszData>, SpectralError> {
    eig.clusters
        .iter()
        .map(|c| {
            check_enclosure(eig, c)?;
            riesz_projection(a, c.lambda, c.radius, nodes)
        })
        .collect()
}

/// Max-abs residuals of the four projection identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    /// `||P^2 - P||`
    pub idempotency: f64,
    /// `||D - (A - lambda) P||`
    pub nilpotent_definition: f64,
    /// `||D P - P D||`
    pub commutation: f64,
    /// `||D^d P||`
    pub nilpotency: f64,
    pub tol: f64,
    pub pass: bool,
}

impl IdentityReport {
    pub fn worst(&self) -> f64 {
        self.idempotency
            .max(self.nilpotent_definition)
            .max(self.commutation)
            .max(self.nilpotency)
    }
}

pub fn verify_identities(a: &DMatrix<f64>, data: &RieszData, tol: f64) -> IdentityReport {
    let n = a.nrows();
    let ac = to_complex(a);
    let p = &data.p;
    let d = &data.d;
    let shifted = &ac - CMatrix::identity(n, n) * data.lambda;
    let mut dp = p.clone();
    for _ in 0..data.multiplicity {
        dp = d * dp;
    }
    let idempotency = max_abs(&(p * p - p));
    let nilpotent_definition = max_abs(&(d - shifted * p));
    let commutation = max_abs(&(d * p - p * d));
    let nilpotency = max_abs(&dp);
    let worst = idempotency.max(nilpotent_definition).max(commutation).max(nilpotency);
    IdentityReport {
        idempotency,
        nilpotent_definition,
        commutation,
        nilpotency,
        tol,
        pass: worst <= tol,
    }
}

/// `||sum_n P_n - I||` in max-abs norm.
pub fn completeness_defect(data: &[RieszData]) -> f64 {
    let Some(first) = data.first() else {
        return f64::INFINITY;
    };
    let n = first.p.nrows();
    let mut sum = CMatrix::zeros(n, n);
    for d in data {
        sum += &d.p;
    }
    max_abs(&(sum - CMatrix::identity(n, n)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma3Report {
    /// Smallest `k` with `D^k P phi ~ 0`; zero when `P phi ~ 0`.
    pub k0: usize,
    /// `||(A - lambda) D^(k0-1) P phi||`, zero in the degenerate case.
    pub residual: f64,
    pub note: Option<String>,
}

/// Finds the chain length of `P phi` under `D` and checks that the last
/// nonzero vector of the chain is an eigenvector.
pub fn lemma3_check(
    a: &DMatrix<f64>,
    data: &RieszData,
    phi: &DVector<Complex64>,
    tol: f64,
) -> Result<Lemma3Report, SpectralError> {
    let n = a.nrows();
    let v0 = &data.p * phi;
    let base = v0.norm();
    let scale = phi.norm() * data.p.norm().max(1.0);
    if base <= tol * scale {
        return Ok(Lemma3Report {
            k0: 0,
            residual: 0.0,
            note: Some("P phi vanishes: phi has no component in this cluster".into()),
        });
    }
    let shifted = to_complex(a) - CMatrix::identity(n, n) * data.lambda;
    let mut prev = v0;
    for k0 in 1..=data.multiplicity.max(1) {
        let next = &data.d * &prev;
        if next.norm() <= tol * base {
            let residual = (&shifted * &prev).norm();
            return Ok(Lemma3Report { k0, residual, note: None });
        }
        prev = next;
    }
    Err(SpectralError::ChainTooLong {
        lambda: data.lambda,
        multiplicity: data.multiplicity,
    })
}

/// Writes `re,im,multiplicity,radius,idempotency,nilpotent_definition,commutation,nilpotency`.
pub fn write_spectrum_csv<W: Write>(
    w: W,
    data: &[RieszData],
    reports: &[IdentityReport],
) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "re",
        "im",
        "multiplicity",
        "radius",
        "idempotency",
        "nilpotent_definition",
        "commutation",
        "nilpotency",
    ])?;
    for (d, r) in data.iter().zip(reports) {
        out.write_record(&[
            d.lambda.re.to_string(),
            d.lambda.im.to_string(),
            d.multiplicity.to_string(),
            d.radius.to_string(),
            r.idempotency.to_string(),
            r.nilpotent_definition.to_string(),
            r.commutation.to_string(),
            r.nilpotency.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
