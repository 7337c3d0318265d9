use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use super::EllipticError;

/// Nodal samples of `a_ij`, `b_j`, `c` on the full grid (boundary included).
///
/// In 1D only `a[0][0]`, `b[0]` are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub a: Vec<[[f64; 2]; 2]>,
    pub b: Vec<[f64; 2]>,
    pub c: Vec<f64>,
    /// Free-form provenance string carried into exports.
    pub description: String,
}

impl CoefficientField {
    /// Samples coefficient functions on every node of `mesh`.
    pub fn from_fn(
        mesh: &Mesh,
        a: impl Fn(f64, f64) -> [[f64; 2]; 2],
        b: impl Fn(f64, f64) -> [f64; 2],
        c: impl Fn(f64, f64) -> f64,
        description: impl Into<String>,
    ) -> Self {
        Self {
            a: mesh.sample_full(a),
            b: mesh.sample_full(b),
            c: mesh.sample_full(c),
            description: description.into(),
        }
    }

    /// Constant coefficients.
    pub fn constant(mesh: &Mesh, a: [[f64; 2]; 2], b: [f64; 2], c: f64) -> Self {
        Self::from_fn(
            mesh,
            |_, _| a,
            |_, _| b,
            |_, _| c,
            format!("constant a={a:?} b={b:?} c={c}"),
        )
    }

    /// `a_ij = delta_ij`, `b = 0`, `c = 0`.
    pub fn laplacian(mesh: &Mesh) -> Self {
        Self::constant(mesh, [[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 0.0)
    }

    fn len(&self) -> usize {
        self.a.len()
    }
}

/// Smallest eigenvalue of the symmetric 2x2 (or 1x1) principal part over all nodes.
pub fn check_ellipticity(dim: usize, coeffs: &CoefficientField) -> f64 {
    coeffs
        .a
        .iter()
        .map(|a| {
            if dim == 1 {
                a[0][0]
            } else {
                let mean = 0.5 * (a[0][0] + a[1][1]);
                let half = 0.5 * (a[0][0] - a[1][1]);
                mean - half.hypot(a[0][1])
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Dense matrix of `A` with Dirichlet boundary eliminated, plus its inputs.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    matrix: DMatrix<f64>,
    mesh: Mesh,
    coefficients: CoefficientField,
}

/// JSON header accompanying a coordinate-list export.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OperatorHeader {
    pub dimension: usize,
    pub dof: usize,
    pub spacing: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub interior_counts: Vec<usize>,
    pub nonzeros: usize,
    pub coefficients: String,
}

impl DiscreteOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn coefficients(&self) -> &CoefficientField {
        &self.coefficients
    }

    pub fn dof(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    pub fn header(&self) -> OperatorHeader {
        let d = self.mesh.dim();
        OperatorHeader {
            dimension: d,
            dof: self.dof(),
            spacing: (0..d).map(|ax| self.mesh.spacing(ax)).collect(),
            lower: self.mesh.lower()[..d].to_vec(),
            upper: self.mesh.upper()[..d].to_vec(),
            interior_counts: self.mesh.counts()[..d].to_vec(),
            nonzeros: self.matrix.iter().filter(|v| **v != 0.0).count(),
            coefficients: self.coefficients.description.clone(),
        }
    }

    /// Writes `row col value` lines (0-based, row-major) for every nonzero entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in 0..self.matrix.nrows() {
            for c in 0..self.matrix.ncols() {
                let v = self.matrix[(r, c)];
                if v != 0.0 {
                    writeln!(w, "{r} {c} {v:e}")?;
                }
            }
        }
        Ok(())
    }
}

fn validate(mesh: &Mesh, coeffs: &CoefficientField) -> Result<(), EllipticError> {
    let n = mesh.full_len();
    if coeffs.len() != n || coeffs.b.len() != n || coeffs.c.len() != n {
        return Err(EllipticError::ShapeMismatch {
            expected: n,
            found: [coeffs.a.len(), coeffs.b.len(), coeffs.c.len()],
        });
    }
    let finite = coeffs.a.iter().flatten().flatten().all(|v| v.is_finite())
        && coeffs.b.iter().flatten().all(|v| v.is_finite())
        && coeffs.c.iter().all(|v| v.is_finite());
    if !finite {
        return Err(EllipticError::NonFinite);
    }
    if mesh.dim() == 2 {
        for (k, a) in coeffs.a.iter().enumerate() {
            if a[0][1] != a[1][0] {
                return Err(EllipticError::NotSymmetric(k));
            }
        }
    }
    let min_eig = check_ellipticity(mesh.dim(), coeffs);
    if min_eig <= 0.0 {
        return Err(EllipticError::NotElliptic(min_eig));
    }
    Ok(())
}

/// Assembles `A = -[div(a grad) + b . grad + c]` with homogeneous Dirichlet data.
///
/// Diagonal fluxes use midpoint averages of `a_ii`, mixed terms the nodal
/// nine-point product rule, first-order terms centred differences.
pub fn assemble(mesh: &Mesh, coeffs: &CoefficientField) -> Result<DiscreteOperator, EllipticError> {
    validate(mesh, coeffs)?;
    let n = mesh.dof();
    let [nx, ny] = mesh.counts();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let h = [mesh.spacing(0), mesh.spacing(mesh.dim() - 1)];

    // interior unknown at full-grid (i, j), or None on the boundary
    let unknown = |i: usize, j: usize| -> Option<usize> {
        if i == 0 || i > nx {
            return None;
        }
        if mesh.dim() == 1 {
            return Some(i - 1);
        }
        if j == 0 || j > ny {
            return None;
        }
        Some((i - 1) + nx * (j - 1))
    };
    let at = |i: usize, j: usize| mesh.full_index(i, j);

    for row in 0..n {
        let (i, j) = mesh.interior_to_full(row);
        let k = at(i, j);
        // contributions to the discretised -A u at this node: coefficient of u at (ii, jj)
        let mut add = |ii: usize, jj: usize, w: f64| {
            if let Some(col) = unknown(ii, jj) {
                m[(row, col)] -= w;
            }
        };

        let axes = mesh.dim();
        for ax in 0..axes {
            let (ip, jp, im, jm) = if ax == 0 {
                (i + 1, j, i - 1, j)
            } else {
                (i, j + 1, i, j - 1)
            };
            let a_here = coeffs.a[k][ax][ax];
            let a_plus = 0.5 * (a_here + coeffs.a[at(ip, jp)][ax][ax]);
            let a_minus = 0.5 * (a_here + coeffs.a[at(im, jm)][ax][ax]);
            let h2 = h[ax] * h[ax];
            add(ip, jp, a_plus / h2);
            add(im, jm, a_minus / h2);
            add(i, j, -(a_plus + a_minus) / h2);

            let bj = coeffs.b[k][ax] / (2.0 * h[ax]);
            add(ip, jp, bj);
            add(im, jm, -bj);
        }

        if axes == 2 {
            // d_x(a12 d_y u) + d_y(a21 d_x u)
            let s = 1.0 / (4.0 * h[0] * h[1]);
            let a12_e = coeffs.a[at(i + 1, j)][0][1];
            let a12_w = coeffs.a[at(i - 1, j)][0][1];
            let a21_n = coeffs.a[at(i, j + 1)][1][0];
            let a21_s = coeffs.a[at(i, j - 1)][1][0];
            add(i + 1, j + 1, s * (a12_e + a21_n));
            add(i + 1, j - 1, -s * (a12_e + a21_s));
            add(i - 1, j + 1, -s * (a12_w + a21_n));
            add(i - 1, j - 1, s * (a12_w + a21_s));
        }

        add(i, j, coeffs.c[k]);
    }

    Ok(DiscreteOperator {
        matrix: m,
        mesh: mesh.clone(),
        coefficients: coeffs.clone(),
    })
}
