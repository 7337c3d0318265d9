//! TOML experiment configuration. Every field has a default so that the
//! resolved configuration can be echoed verbatim into output manifests.

use std::path::{Path, PathBuf};

use fracwave::elliptic::{assemble, subdomain_indices, CoefficientField, Mesh, SubBox};
use fracwave::fraccalc::FractionalOrder;
use fracwave::solver::{Route, SourcePair, TalbotContour};
use fracwave::spectral::DEFAULT_CONTOUR_NODES;
use fracwave::uniqueness::{uniform_times, ObservationRoute, Regularization};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub spectral: SpectralConfig,
    pub solver: SolverConfig,
    pub observation: ObservationConfig,
    pub inversion: InversionConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    /// Lower corner; one entry in 1D, two in 2D.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Interior node counts per axis.
    pub nodes: Vec<usize>,
    /// `[a11, a12, a21, a22]` expressions.
    pub diffusion: [String; 4],
    /// `[b1, b2]` expressions.
    pub advection: [String; 2],
    pub reaction: String,
    pub initial_a: String,
    pub initial_b: String,
    /// Explicit operator rows; replaces the mesh when present.
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Explicit data; replaces `initial_a` / `initial_b` when present.
    pub a_values: Option<Vec<f64>>,
    pub b_values: Option<Vec<f64>>,
    pub alpha: f64,
    pub final_time: f64,
    pub steps: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            lower: vec![0.0],
            upper: vec![1.0],
            nodes: vec![32],
            diffusion: ["1".into(), "0".into(), "0".into(), "1".into()],
            advection: ["0".into(), "0".into()],
            reaction: "0".into(),
            initial_a: "sin(pi*x)".into(),
            initial_b: "0".into(),
            matrix: None,
            a_values: None,
            b_values: None,
            alpha: 1.5,
            final_time: 1.0,
            steps: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    /// Clustering tolerance; `1e-6 ||A||_inf` when unset.
    pub cluster_tol: Option<f64>,
    pub contour_nodes: usize,
    /// Pass threshold for the projection identities.
    pub identity_tol: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            cluster_tol: None,
            contour_nodes: DEFAULT_CONTOUR_NODES,
            identity_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteChoice {
    Timestep,
    Resolvent,
    Spectral,
    All,
}

impl RouteChoice {
    pub fn routes(self) -> Vec<Route> {
        match self {
            RouteChoice::Timestep => vec![Route::Timestep],
            RouteChoice::Resolvent => vec![Route::Resolvent],
            RouteChoice::Spectral => vec![Route::Spectral],
            RouteChoice::All => vec![Route::Timestep, Route::Resolvent, Route::Spectral],
        }
    }
}

impl std::str::FromStr for RouteChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "timestep" => Ok(RouteChoice::Timestep),
            "resolvent" => Ok(RouteChoice::Resolvent),
            "spectral" => Ok(RouteChoice::Spectral),
            "all" => Ok(RouteChoice::All),
            other => Err(format!("unknown route '{other}' (timestep, resolvent, spectral or all)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub route: RouteChoice,
    pub talbot_nodes: usize,
    /// Output times; must be nodes of the time grid when the time-stepping route runs.
    pub output_times: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            route: RouteChoice::All,
            talbot_nodes: 48,
            output_times: vec![0.25, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    /// Observation box; ignored when `indices` is given.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Explicit interior-node indices.
    pub indices: Option<Vec<usize>>,
    /// Evenly spaced sample times `T/n, ..., T` with `T = problem.final_time`.
    pub sample_count: usize,
    /// Explicit sample times; override `sample_count`.
    pub times: Option<Vec<f64>>,
    pub route: RouteChoice,
    /// Relative rank threshold; `max(m, n) eps` when unset.
    pub rank_tol: Option<f64>,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            lower: vec![0.0, 0.0],
            upper: vec![0.25, 1.0],
            indices: None,
            sample_count: 64,
            times: None,
            route: RouteChoice::Spectral,
            rank_tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InversionMethod {
    Tikhonov,
    TruncatedSvd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionConfig {
    pub method: InversionMethod,
    /// Tikhonov weight relative to `sigma_1^2`.
    pub relative_lambda: f64,
    pub truncation_rank: Option<usize>,
    /// Noise standard deviation relative to the data max-norm.
    pub noise: f64,
    pub seed: Option<u64>,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            method: InversionMethod::Tikhonov,
            relative_lambda: fracwave::uniqueness::DEFAULT_TIKHONOV,
            truncation_rank: None,
            noise: 0.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("fracwave-out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Operator, data and node coordinates built from a [`ProblemConfig`].
pub struct Problem {
    pub matrix: DMatrix<f64>,
    pub source: SourcePair,
    pub alpha: FractionalOrder,
    pub mesh: Option<Mesh>,
    /// Node coordinates; the node index stands in for `x` without a mesh.
    pub points: Vec<[f64; 2]>,
    pub dim: usize,
}

fn parse(field: &str, src: &str) -> Result<Expr, CliError> {
    Expr::parse(src).map_err(|e| CliError::Config(format!("problem.{field} = \"{src}\": {e}")))
}

fn pair(field: &str, v: &[f64], dim: usize) -> Result<[f64; 2], CliError> {
    match (dim, v) {
        (1, [a]) | (1, [a, _]) => Ok([*a, 0.0]),
        (2, [a, b]) => Ok([*a, *b]),
        _ => Err(CliError::Config(format!("{field} needs {dim} entries, got {}", v.len()))),
    }
}

impl ProblemConfig {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn build(&self) -> Result<Problem, CliError> {
        let alpha = FractionalOrder::wave(self.alpha).map_err(|e| CliError::Config(format!("problem.alpha: {e}")))?;
        if !(self.final_time.is_finite() && self.final_time > 0.0) {
            return Err(CliError::Config(format!("problem.final_time must be positive, got {}", self.final_time)));
        }
        if let Some(rows) = &self.matrix {
            let n = rows.len();
            if n == 0 || rows.iter().any(|r| r.len() != n) {
                return Err(CliError::Config("problem.matrix must be a non-empty square array".into()));
            }
            let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            let values = |field: &str, v: &Option<Vec<f64>>| -> Result<DVector<f64>, CliError> {
                match v {
                    Some(v) if v.len() == n => Ok(DVector::from_column_slice(v)),
                    Some(v) => Err(CliError::Config(format!("problem.{field} has {} entries, matrix is {n}x{n}", v.len()))),
                    None => Err(CliError::Config(format!("problem.{field} is required with problem.matrix"))),
                }
            };
            let source = SourcePair::new(values("a_values", &self.a_values)?, values("b_values", &self.b_values)?)
                .map_err(|e| CliError::Config(e.to_string()))?;
            return Ok(Problem {
                matrix,
                source,
                alpha,
                mesh: None,
                points: (0..n).map(|i| [i as f64, 0.0]).collect(),
                dim: 1,
            });
        }
        let dim = self.dim();
        let mesh = match dim {
            1 => Mesh::interval(pair("problem.lower", &self.lower, 1)?[0], pair("problem.upper", &self.upper, 1)?[0], self.nodes[0]),
            2 => {
                let lo = pair("problem.lower", &self.lower, 2)?;
                let hi = pair("problem.upper", &self.upper, 2)?;
                Mesh::rectangle([lo[0], hi[0]], [lo[1], hi[1]], [self.nodes[0], self.nodes[1]])
            }
            _ => return Err(CliError::Config("problem.nodes must have one or two entries".into())),
        }
        .map_err(|e| CliError::Config(format!("problem mesh: {e}")))?;
        let d: Vec<Expr> = self
            .diffusion
            .iter()
            .enumerate()
            .map(|(i, s)| parse(&format!("diffusion[{i}]"), s))
            .collect::<Result<_, _>>()?;
        let b: Vec<Expr> = self
            .advection
            .iter()
            .enumerate()
            .map(|(i, s)| parse(&format!("advection[{i}]"), s))
            .collect::<Result<_, _>>()?;
        let c = parse("reaction", &self.reaction)?;
        let coeffs = CoefficientField::from_fn(
            &mesh,
            |x, y| [[d[0].eval(x, y), d[1].eval(x, y)], [d[2].eval(x, y), d[3].eval(x, y)]],
            |x, y| [b[0].eval(x, y), b[1].eval(x, y)],
            |x, y| c.eval(x, y),
            format!(
                "a = [{}], b = [{}], c = {}",
                self.diffusion.join(", "),
                self.advection.join(", "),
                self.reaction
            ),
        );
        let op = assemble(&mesh, &coeffs).map_err(|e| CliError::Config(format!("operator: {e}")))?;
        let ea = parse("initial_a", &self.initial_a)?;
        let eb = parse("initial_b", &self.initial_b)?;
        let n = mesh.dof();
        let explicit = |field: &str, v: &Option<Vec<f64>>, e: &Expr| -> Result<DVector<f64>, CliError> {
            match v {
                Some(v) if v.len() == n => Ok(DVector::from_column_slice(v)),
                Some(v) => Err(CliError::Config(format!("problem.{field} has {} entries, mesh has {n} nodes", v.len()))),
                None => Ok(DVector::from_vec(mesh.sample(|x, y| e.eval(x, y)))),
            }
        };
        let source = SourcePair::new(explicit("a_values", &self.a_values, &ea)?, explicit("b_values", &self.b_values, &eb)?)
            .map_err(|e| CliError::Config(format!("initial data: {e}")))?;
        Ok(Problem {
            matrix: op.matrix().clone(),
            source,
            alpha,
            points: mesh.points(),
            mesh: Some(mesh),
            dim,
        })
    }
}

impl ExperimentConfig {
    pub fn contour(&self) -> TalbotContour {
        TalbotContour::new(self.solver.talbot_nodes)
    }

    pub fn observation_route(&self) -> Result<ObservationRoute, CliError> {
        Ok(match self.observation.route {
            RouteChoice::Timestep => ObservationRoute::Timestep { steps: self.problem.steps },
            RouteChoice::Resolvent => ObservationRoute::Resolvent { contour: self.contour() },
            RouteChoice::Spectral => ObservationRoute::Spectral {
                cluster_tol: self.spectral.cluster_tol,
                contour_nodes: self.spectral.contour_nodes,
            },
            RouteChoice::All => return Err(CliError::Config("observation.route must name a single route".into())),
        })
    }

    pub fn observation_indices(&self, problem: &Problem) -> Result<Vec<usize>, CliError> {
        if let Some(idx) = &self.observation.indices {
            return Ok(idx.clone());
        }
        let Some(mesh) = &problem.mesh else {
            return Err(CliError::Config("observation.indices is required with problem.matrix".into()));
        };
        let sub = if problem.dim == 1 {
            SubBox::interval(self.observation.lower[0], self.observation.upper[0])
        } else {
            let lo = pair("observation.lower", &self.observation.lower, 2)?;
            let hi = pair("observation.upper", &self.observation.upper, 2)?;
            SubBox::rectangle([lo[0], hi[0]], [lo[1], hi[1]])
        };
        subdomain_indices(mesh, &sub).map_err(|e| CliError::Config(format!("observation box: {e}")))
    }

    pub fn observation_times(&self) -> Vec<f64> {
        self.observation
            .times
            .clone()
            .unwrap_or_else(|| uniform_times(self.problem.final_time, self.observation.sample_count))
    }

    /// Regularisation for a map whose largest singular value is `sigma1`.
    pub fn regularization(&self, sigma1: f64) -> Result<Regularization, CliError> {
        match self.inversion.method {
            InversionMethod::Tikhonov => {
                let rel = self.inversion.relative_lambda;
                if !(rel.is_finite() && rel >= 0.0) {
                    return Err(CliError::Config(format!("inversion.relative_lambda = {rel} must be non-negative")));
                }
                Ok(Regularization::Tikhonov { lambda: Some(rel * sigma1 * sigma1) })
            }
            InversionMethod::TruncatedSvd => match self.inversion.truncation_rank {
                Some(k) => Ok(Regularization::TruncatedSvd { k }),
                None => Err(CliError::Config("inversion.truncation_rank is required for truncated-svd".into())),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let c = ExperimentConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), c);
    }

    #[test]
    fn unknown_field_is_reported_with_location() {
        let err = ExperimentConfig::from_toml("[problem]\nalpah = 1.5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpah") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn alpha_out_of_range() {
        let c = ExperimentConfig::from_toml("[problem]\nalpha = 2.5\n").unwrap();
        assert!(matches!(c.problem.build(), Err(CliError::Config(m)) if m.contains("alpha")));
    }

    #[test]
    fn explicit_matrix_problem() {
        let c = ExperimentConfig::from_toml("[problem]\nmatrix = [[2.0, 1.0], [0.0, 2.0]]\na_values = [1, 0]\nb_values = [0, 0]\n").unwrap();
        let p = c.problem.build().unwrap();
        assert_eq!(p.matrix[(0, 1)], 1.0);
        assert!(p.mesh.is_none());
        let c = ExperimentConfig::from_toml("[problem]\nmatrix = [[2.0, 1.0]]\na_values = [1]\nb_values = [0]\n").unwrap();
        assert!(c.problem.build().is_err());
    }

    #[test]
    fn reference_problem_from_expressions() {
        let c = ExperimentConfig::from_toml(
            "[problem]\nadvection = [\"1\", \"0\"]\ninitial_b = \"x*(1-x)\"\n",
        )
        .unwrap();
        let p = c.problem.build().unwrap();
        let (op, s) = fracwave::acceptance::reference_problem();
        assert!((&p.matrix - op.matrix()).amax() < 1e-12);
        assert!((&p.source.stacked() - s.stacked()).amax() < 1e-15);
        assert_eq!(c.observation_indices(&p).unwrap(), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn bad_expression_names_the_field() {
        let c = ExperimentConfig::from_toml("[problem]\nreaction = \"2 *\"\n").unwrap();
        match c.problem.build() {
            Err(CliError::Config(m)) => assert!(m.contains("problem.reaction"), "{m}"),
            _ => panic!("expected a config error"),
        }
    }
}
