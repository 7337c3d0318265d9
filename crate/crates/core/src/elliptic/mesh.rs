use serde::{Deserialize, Serialize};

use super::EllipticError;

/// Upper bound on the number of unknowns for dense storage.
pub const MAX_DOF: usize = 4096;

/// Uniform grid on an interval or rectangle. Only interior nodes carry unknowns;
/// boundary nodes exist for coefficient sampling.
///
/// Interior unknowns are numbered with `x` fastest: `idx = i + nx * j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    dim: usize,
    lower: [f64; 2],
    upper: [f64; 2],
    counts: [usize; 2],
}

/// Closed axis-aligned box `lower <= x <= upper`; the second axis is ignored in 1D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubBox {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl SubBox {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Self {
            lower: [lo, f64::NEG_INFINITY],
            upper: [hi, f64::INFINITY],
        }
    }

    pub fn rectangle(x: [f64; 2], y: [f64; 2]) -> Self {
        Self {
            lower: [x[0], y[0]],
            upper: [x[1], y[1]],
        }
    }
}

impl Mesh {
    pub fn interval(x0: f64, x1: f64, n: usize) -> Result<Self, EllipticError> {
        Self::build(1, [x0, 0.0], [x1, 1.0], [n, 1])
    }

    pub fn rectangle(x: [f64; 2], y: [f64; 2], counts: [usize; 2]) -> Result<Self, EllipticError> {
        Self::build(2, [x[0], y[0]], [x[1], y[1]], counts)
    }

    /// Unit interval `(0, 1)` with `n` interior nodes.
    pub fn unit_interval(n: usize) -> Result<Self, EllipticError> {
        Self::interval(0.0, 1.0, n)
    }

    fn build(dim: usize, lower: [f64; 2], upper: [f64; 2], counts: [usize; 2]) -> Result<Self, EllipticError> {
        for axis in 0..dim {
            if !(lower[axis].is_finite() && upper[axis].is_finite() && lower[axis] < upper[axis]) {
                return Err(EllipticError::InvalidMesh(format!(
                    "axis {axis}: need finite lower < upper, got [{}, {}]",
                    lower[axis], upper[axis]
                )));
            }
            if counts[axis] < 2 {
                return Err(EllipticError::InvalidMesh(format!(
                    "axis {axis}: at least 2 interior nodes required, got {}",
                    counts[axis]
                )));
            }
        }
        let mesh = Self { dim, lower, upper, counts };
        if mesh.dof() > MAX_DOF {
            return Err(EllipticError::TooLarge(mesh.dof()));
        }
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> [f64; 2] {
        self.lower
    }

    pub fn upper(&self) -> [f64; 2] {
        self.upper
    }

    /// Interior node counts; the second entry is 1 in 1D.
    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn dof(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.counts[axis] + 1) as f64
    }

    /// Node counts including boundary layers.
    pub fn full_counts(&self) -> [usize; 2] {
        match self.dim {
            1 => [self.counts[0] + 2, 1],
            _ => [self.counts[0] + 2, self.counts[1] + 2],
        }
    }

    pub fn full_len(&self) -> usize {
        let f = self.full_counts();
        f[0] * f[1]
    }

    /// Coordinates of full-grid node `(i, j)`; `i = 0` and `i = nx + 1` are boundary.
    pub fn full_point(&self, i: usize, j: usize) -> [f64; 2] {
        let x = self.lower[0] + i as f64 * self.spacing(0);
        let y = if self.dim == 1 {
            0.0
        } else {
            self.lower[1] + j as f64 * self.spacing(1)
        };
        [x, y]
    }

    /// Full-grid linear index of `(i, j)`.
    pub fn full_index(&self, i: usize, j: usize) -> usize {
        i + self.full_counts()[0] * j
    }

    /// Full-grid coordinates `(i, j)` of interior unknown `idx`.
    pub fn interior_to_full(&self, idx: usize) -> (usize, usize) {
        let nx = self.counts[0];
        let (i, j) = (idx % nx, idx / nx);
        if self.dim == 1 {
            (i + 1, 0)
        } else {
            (i + 1, j + 1)
        }
    }

    /// Coordinates of interior unknown `idx`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.interior_to_full(idx);
        self.full_point(i, j)
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.dof()).map(|k| self.point(k)).collect()
    }

    /// Samples `f` at the interior nodes.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.points().into_iter().map(|[x, y]| f(x, y)).collect()
    }

    /// Samples `f` at every node including the boundary, in full-grid order.
    pub fn sample_full<T>(&self, f: impl Fn(f64, f64) -> T) -> Vec<T> {
        let fc = self.full_counts();
        let mut out = Vec::with_capacity(self.full_len());
        for j in 0..fc[1] {
            for i in 0..fc[0] {
                let [x, y] = self.full_point(i, j);
                out.push(f(x, y));
            }
        }
        out
    }
}

/// Interior unknowns inside the closed box, in increasing index order.
pub fn subdomain_indices(mesh: &Mesh, sub: &SubBox) -> Result<Vec<usize>, EllipticError> {
    let slack = [1e-12 * mesh.spacing(0), 1e-12 * mesh.spacing(mesh.dim() - 1)];
    let inside = |p: [f64; 2]| {
        (0..mesh.dim()).all(|ax| p[ax] >= sub.lower[ax] - slack[ax] && p[ax] <= sub.upper[ax] + slack[ax])
    };
    let idx: Vec<usize> = (0..mesh.dof()).filter(|&k| inside(mesh.point(k))).collect();
    if idx.is_empty() {
        return Err(EllipticError::EmptySubdomain);
    }
    Ok(idx)
}
