//! Probe of the identity `(-eta)^(1/alpha) f_psi(eta) = -g_psi(eta)` with
//! `f_psi = <(A - eta)^{-1} a, psi>` and `g_psi = <(A - eta)^{-1} b, psi>`.
//! A multivalued left side can only match the single-valued right side on a
//! continuum of `eta` when both vanish.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::UniquenessError;
use crate::spectral::{resolvent, to_complex};

/// Unit vector supported on the observed nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeVector {
    psi: DVector<f64>,
    label: String,
}

impl ProbeVector {
    /// Normalises `psi`; entries off `omega` must be zero.
    pub fn new(psi: DVector<f64>, omega: &[usize], label: impl Into<String>) -> Result<Self, UniquenessError> {
        if let Some(i) = (0..psi.len()).find(|i| psi[*i] != 0.0 && !omega.contains(i)) {
            return Err(UniquenessError::InvalidProbe(format!("entry {i} lies outside the subdomain")));
        }
        let norm = psi.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(UniquenessError::InvalidProbe("probe has zero or non-finite norm".into()));
        }
        Ok(Self {
            psi: psi / norm,
            label: label.into(),
        })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.psi
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Unit vectors on each node of `omega` plus one seeded Gaussian direction on `omega`.
pub fn probe_vectors(dof: usize, omega: &[usize], seed: u64) -> Result<Vec<ProbeVector>, UniquenessError> {
    if omega.is_empty() {
        return Err(UniquenessError::EmptySubdomain);
    }
    if let Some(&bad) = omega.iter().find(|&&i| i >= dof) {
        return Err(UniquenessError::IndexOutOfRange { index: bad, dof });
    }
    let mut out = Vec::with_capacity(omega.len() + 1);
    for &i in omega {
        let mut v = DVector::zeros(dof);
        v[i] = 1.0;
        out.push(ProbeVector::new(v, omega, format!("e{i}"))?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::zeros(dof);
    for &i in omega {
        v[i] = StandardNormal.sample(&mut rng);
    }
    out.push(ProbeVector::new(v, omega, format!("random(seed={seed})"))?);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchRow {
    pub eta: Complex64,
    pub f: Complex64,
    pub g: Complex64,
    /// `|(-eta)^(1/alpha) f + g|`, principal branch.
    pub residual: f64,
}

/// Evaluates `f_psi`, `g_psi` and the identity residual at every `eta`.
pub fn branch_identity_probe(
    a_op: &DMatrix<f64>,
    a: &DVector<f64>,
    b: &DVector<f64>,
    psi: &ProbeVector,
    alpha: f64,
    etas: &[Complex64],
) -> Result<Vec<BranchRow>, UniquenessError> {
    let n = a_op.nrows();
    if a.len() != n || b.len() != n || psi.values().len() != n {
        return Err(UniquenessError::Shape("operator, data and probe sizes differ".into()));
    }
    let ac = to_complex(a_op);
    let ca = a.map(|v| Complex64::new(v, 0.0));
    let cb = b.map(|v| Complex64::new(v, 0.0));
    let psi = psi.values().map(|v| Complex64::new(v, 0.0));
    etas.par_iter()
        .map(|&eta| {
            // resolvent() returns (eta - A)^{-1}
            let (r, _) = resolvent(&ac, eta)?;
            let f = -(&r * &ca).dot(&psi);
            let g = -(&r * &cb).dot(&psi);
            let residual = ((-eta).powf(1.0 / alpha) * f + g).norm();
            Ok(BranchRow { eta, f, g, residual })
        })
        .collect()
}
