use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::SpectralError;

/// A group of numerically coincident eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    /// Mean of the member eigenvalues.
    pub lambda: Complex64,
    /// Contour radius.
    pub radius: f64,
    /// Number of eigensolver eigenvalues merged into this cluster.
    pub multiplicity: usize,
    pub members: Vec<Complex64>,
}

impl Cluster {
    /// Largest distance from the centre to a member.
    pub fn spread(&self) -> f64 {
        self.members.iter().map(|m| (m - self.lambda).norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Eigensystem {
    pub clusters: Vec<Cluster>,
    pub cluster_tol: f64,
    /// All eigenvalues as returned by the eigensolver.
    pub eigenvalues: Vec<Complex64>,
}

impl Eigensystem {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.clusters.iter().map(|c| c.multiplicity).sum()
    }
}

/// Default clustering tolerance `1e-6 * ||A||_inf`.
pub fn default_cluster_tol(a: &DMatrix<f64>) -> f64 {
    let norm = a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    1e-6 * norm.max(f64::MIN_POSITIVE)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Real Schur eigensolve followed by single-linkage clustering at `cluster_tol`.
///
/// Cluster radii are half the distance to the nearest other cluster, never below
/// `10 * cluster_tol`. A lone cluster gets `max(1, 2 * spread)`. Clusters are
/// ordered by real part, then imaginary part.
pub fn eigendecompose(a: &DMatrix<f64>, cluster_tol: Option<f64>) -> Result<Eigensystem, SpectralError> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(SpectralError::Shape(format!("expected a nonempty square matrix, got {}x{}", n, a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    let tol = cluster_tol.unwrap_or_else(|| default_cluster_tol(a));
    if !(tol.is_finite() && tol > 0.0) {
        return Err(SpectralError::Shape(format!("cluster tolerance must be positive, got {tol}")));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000 * n.max(10))
        .ok_or_else(|| SpectralError::Eigensolver("Schur iteration did not converge".into()))?;
    let mut eig: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));

    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if (eig[i] - eig[j]).norm() <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[rj] = ri;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_slot[r]].push(i);
    }

    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|g| {
            let members: Vec<Complex64> = g.iter().map(|&i| eig[i]).collect();
            let lambda = members.iter().sum::<Complex64>() / members.len() as f64;
            Cluster {
                lambda,
                radius: 0.0,
                multiplicity: members.len(),
                members,
            }
        })
        .collect();
    clusters.sort_by(|x, y| x.lambda.re.total_cmp(&y.lambda.re).then(x.lambda.im.total_cmp(&y.lambda.im)));

    let centres: Vec<Complex64> = clusters.iter().map(|c| c.lambda).collect();
    for (k, c) in clusters.iter_mut().enumerate() {
        let gap = centres
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, z)| (z - c.lambda).norm())
            .fold(f64::INFINITY, f64::min);
        c.radius = if gap.is_finite() {
            (0.5 * gap).max(10.0 * tol)
        } else {
            (2.0 * c.spread()).max(1.0)
        };
    }

    Ok(Eigensystem {
        clusters,
        cluster_tol: tol,
        eigenvalues: eig,
    })
}
