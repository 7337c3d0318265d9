use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::fraccalc::{TimeGrid, TimeSeries};

/// Initial displacement `a` and velocity `b` on the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePair {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
}

impl SourcePair {
    pub fn new(a: DVector<f64>, b: DVector<f64>) -> Result<Self, SolverError> {
        if a.len() != b.len() {
            return Err(SolverError::Shape(format!("a has {} entries, b has {}", a.len(), b.len())));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite("source data".into()));
        }
        Ok(Self { a, b })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            a: DVector::zeros(n),
            b: DVector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `(a; b)` stacked into one vector of length `2N`.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.len();
        DVector::from_fn(2 * n, |i, _| if i < n { self.a[i] } else { self.b[i - n] })
    }

    pub fn from_stacked(x: &DVector<f64>) -> Result<Self, SolverError> {
        if !x.len().is_multiple_of(2) {
            return Err(SolverError::Shape(format!("stacked vector has odd length {}", x.len())));
        }
        let n = x.len() / 2;
        Self::new(x.rows(0, n).into_owned(), x.rows(n, n).into_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Timestep,
    Resolvent,
    Spectral,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Timestep => "timestep",
            Route::Resolvent => "resolvent",
            Route::Spectral => "spectral",
        }
    }
}

impl std::str::FromStr for Route {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "timestep" => Ok(Route::Timestep),
            "resolvent" => Ok(Route::Resolvent),
            "spectral" => Ok(Route::Spectral),
            other => Err(SolverError::Shape(format!("unknown route '{other}'"))),
        }
    }
}

/// Solution states `u(t_k)` with the parameters that produced them.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub alpha: f64,
    pub route: Route,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Present when `times` are the nodes of a uniform grid.
    pub grid: Option<TimeGrid>,
    pub parameters: BTreeMap<String, serde_json::Value>,
}

impl SolutionField {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    /// Index of the stored time within `1e-9 * max(1, t)` of `t`.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    pub fn state_at(&self, t: f64) -> Result<&DVector<f64>, SolverError> {
        self.time_index(t)
            .map(|k| &self.states[k])
            .ok_or(SolverError::MissingTime(t))
    }

    /// Euclidean norms `||u(t_k)||_2`.
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.norm()).collect()
    }

    /// Component `i` as a time series; requires a uniform grid.
    pub fn component(&self, i: usize) -> Result<TimeSeries, SolverError> {
        let grid = self.grid.ok_or(SolverError::MissingGrid)?;
        Ok(TimeSeries::new(grid, self.states.iter().map(|s| s[i]).collect())?)
    }

    /// `max_t ||u(t) - v(t)||_2 / ||v(t)||_2` over the requested times.
    pub fn relative_difference(&self, other: &SolutionField, times: &[f64]) -> Result<f64, SolverError> {
        let mut worst: f64 = 0.0;
        for &t in times {
            let u = self.state_at(t)?;
            let v = other.state_at(t)?;
            let denom = v.norm();
            let diff = (u - v).norm();
            worst = worst.max(if denom > 0.0 { diff / denom } else { diff });
        }
        Ok(worst)
    }

    /// Writes `x[,y],u` for time slice `k`, one row per interior node.
    pub fn write_slice_csv<W: Write>(&self, k: usize, points: &[[f64; 2]], dim: usize, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        if dim == 1 {
            out.write_record(["x", "u"])?;
        } else {
            out.write_record(["x", "y", "u"])?;
        }
        for (p, v) in points.iter().zip(self.states[k].iter()) {
            if dim == 1 {
                out.serialize((p[0], v))?;
            } else {
                out.serialize((p[0], p[1], v))?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// JSON description: order, route, times and solver parameters.
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "alpha": self.alpha,
            "route": self.route,
            "times": self.times,
            "grid": self.grid,
            "dof": self.dof(),
            "parameters": self.parameters,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stacking_roundtrip() {
        let s = SourcePair::new(DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![3.0, 4.0])).unwrap();
        let x = s.stacked();
        assert_eq!(x.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(SourcePair::from_stacked(&x).unwrap(), s);
        assert!(SourcePair::new(DVector::zeros(2), DVector::zeros(3)).is_err());
        assert!(SourcePair::new(DVector::from_vec(vec![f64::NAN]), DVector::zeros(1)).is_err());
    }

    #[test]
    fn route_names() {
        for r in [Route::Timestep, Route::Resolvent, Route::Spectral] {
            assert_eq!(r.name().parse::<Route>().unwrap(), r);
        }
        assert!("bogus".parse::<Route>().is_err());
    }

    #[test]
    fn slice_csv() {
        let f = SolutionField {
            alpha: 1.5,
            route: Route::Spectral,
            times: vec![0.5],
            states: vec![DVector::from_vec(vec![1.0, -2.0])],
            grid: None,
            parameters: BTreeMap::new(),
        };
        let mut buf = Vec::new();
        f.write_slice_csv(0, &[[0.25, 0.0], [0.75, 0.0]], 1, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,u\n0.25,1.0\n0.75,-2.0\n");
        assert!(f.state_at(0.5).is_ok());
        assert!(f.state_at(0.6).is_err());
        assert_eq!(f.manifest()["route"], "spectral");
    }
}
