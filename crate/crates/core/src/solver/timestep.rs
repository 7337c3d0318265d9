//! Implicit product-integration stepping for `w = u - a - b t`.
//!
//! The equation is read as `w = J^alpha f` with `f = -A u`. Applying the
//! piecewise-linear product rule to `J^alpha` and moving the newest node to the
//! left gives one linear solve per step,
//!
//! ```text
//! (w0 I + A) w_k = H_k - A (a + b t_k),   w0 = Gamma(alpha + 2) / dt^alpha,
//! H_k = c0_k f_0 + sum_{j=1}^{k-1} c_{k-j} f_j.
//! ```

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::field::{Route, SolutionField, SourcePair};
use super::SolverError;
use crate::fraccalc::{FractionalOrder, RlWeights, TimeGrid};

/// Propagates `R` source pairs at once; `a` and `b` are `N x R`.
/// Returns `u(t_k)` as `N x R` blocks for `k = 0..=K`.
pub fn timestep_propagate(
    a_op: &DMatrix<f64>,
    alpha: FractionalOrder,
    grid: TimeGrid,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<Vec<DMatrix<f64>>, SolverError> {
    super::check_wave(alpha)?;
    let n = a_op.nrows();
    if a_op.ncols() != n || a.nrows() != n || b.nrows() != n || a.ncols() != b.ncols() {
        return Err(SolverError::Shape(format!(
            "operator {}x{}, sources {}x{} and {}x{}",
            a_op.nrows(),
            a_op.ncols(),
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let r = a.ncols();
    let steps = grid.steps();
    let weights = RlWeights::new(alpha.value(), grid.step(), steps);
    let omega0 = 1.0 / weights.scale();
    let step_matrix = a_op + DMatrix::identity(n, n) * omega0;
    let lu = step_matrix.lu();
    if !lu.is_invertible() {
        return Err(SolverError::SingularStep);
    }

    let block = n * r;
    // f_j = -A u_j, stored contiguously
    let mut f = vec![0.0; (steps + 1) * block];
    let f0 = -(a_op * a);
    f[..block].copy_from_slice(f0.as_slice());

    let mut states = Vec::with_capacity(steps + 1);
    states.push(a.clone());
    let mut hist = vec![0.0; block];
    for k in 1..=steps {
        let c0 = weights.start(k);
        for (h, v) in hist.iter_mut().zip(&f[..block]) {
            *h = c0 * v;
        }
        for j in 1..k {
            let c = weights.lag(k - j);
            let fj = &f[j * block..(j + 1) * block];
            for (h, v) in hist.iter_mut().zip(fj) {
                *h += c * v;
            }
        }
        let base = a + b * grid.node(k);
        let rhs = DMatrix::from_column_slice(n, r, &hist) - a_op * &base;
        let w = lu.solve(&rhs).ok_or(SolverError::SingularStep)?;
        let u = w + base;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite(format!("time step {k}")));
        }
        let fk = -(a_op * &u);
        f[k * block..(k + 1) * block].copy_from_slice(fk.as_slice());
        states.push(u);
    }
    Ok(states)
}

/// Time-stepping route for a single source pair on `grid`.
pub fn solve_timestep(
    a_op: &DMatrix<f64>,
    s: &SourcePair,
    alpha: FractionalOrder,
    grid: TimeGrid,
) -> Result<SolutionField, SolverError> {
    let a = DMatrix::from_column_slice(s.len(), 1, s.a.as_slice());
    let b = DMatrix::from_column_slice(s.len(), 1, s.b.as_slice());
    let blocks = timestep_propagate(a_op, alpha, grid, &a, &b)?;
    let states = blocks.into_iter().map(|m| DVector::from_column_slice(m.as_slice())).collect();
    let mut parameters = BTreeMap::new();
    parameters.insert("steps".into(), grid.steps().into());
    parameters.insert("final_time".into(), grid.final_time().into());
    parameters.insert("scheme".into(), "implicit product integration on w = u - a - bt".into());
    Ok(SolutionField {
        alpha: alpha.value(),
        route: Route::Timestep,
        times: grid.nodes().collect(),
        states,
        grid: Some(grid),
        parameters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::{mittag_leffler_real, rgamma};

    fn scalar(l: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, l)
    }

    fn pair(a: f64, b: f64) -> SourcePair {
        SourcePair::new(DVector::from_element(1, a), DVector::from_element(1, b)).unwrap()
    }

    fn order(a: f64) -> FractionalOrder {
        FractionalOrder::wave(a).unwrap()
    }

    #[test]
    fn zero_operator_gives_affine_motion() {
        let a_op = DMatrix::zeros(3, 3);
        let s = SourcePair::new(DVector::from_vec(vec![1.0, -2.0, 0.5]), DVector::from_vec(vec![0.3, 0.0, -1.0])).unwrap();
        let grid = TimeGrid::new(2.0, 40).unwrap();
        let u = solve_timestep(&a_op, &s, order(1.5), grid).unwrap();
        for (t, st) in u.times.iter().zip(&u.states) {
            assert!((st - (&s.a + &s.b * *t)).amax() < 1e-14);
        }
    }

    #[test]
    fn scalar_mode_converges_to_mittag_leffler() {
        let alpha = 1.5;
        let mut prev = f64::INFINITY;
        for k in [64usize, 128, 256] {
            let grid = TimeGrid::new(1.0, k).unwrap();
            let u = solve_timestep(&scalar(1.0), &pair(1.0, 0.0), order(alpha), grid).unwrap();
            let err = u
                .times
                .iter()
                .zip(&u.states)
                .map(|(&t, s)| (s[0] - mittag_leffler_real(alpha, 1.0, -t.powf(alpha)).unwrap()).abs())
                .fold(0.0, f64::max);
            assert!(err < 0.5 * prev, "K={k}: {err}");
            prev = err;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn velocity_mode_matches_oracle() {
        let alpha = 1.5;
        let grid = TimeGrid::new(1.0, 512).unwrap();
        let u = solve_timestep(&scalar(2.0), &pair(0.0, 1.0), order(alpha), grid).unwrap();
        let exact = mittag_leffler_real(alpha, 2.0, -2.0).unwrap();
        assert!((u.states[512][0] - exact).abs() < 1e-5);
    }

    #[test]
    fn near_classical_wave_limit() {
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let u = solve_timestep(&scalar(4.0), &pair(1.0, 0.0), order(1.99), grid).unwrap();
        let got = u.states[1000][0];
        assert!((got - 2f64.cos()).abs() < 0.05 * 2f64.cos().abs().max(0.1), "{got}");
    }

    #[test]
    fn initial_slope_is_velocity() {
        let a_op = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let s = SourcePair::new(DVector::from_vec(vec![1.0, 0.5]), DVector::from_vec(vec![-0.7, 0.2])).unwrap();
        let mut prev = f64::INFINITY;
        for k in [100usize, 200, 400] {
            let grid = TimeGrid::new(1.0, k).unwrap();
            let u = solve_timestep(&a_op, &s, order(1.5), grid).unwrap();
            let slope = (&u.states[1] - &u.states[0]) / grid.step();
            let err = (slope - &s.b).amax();
            assert!(err < prev);
            // leading correction is -A a t^alpha / Gamma(alpha + 1), so the slope error is O(h^(alpha - 1))
            let bound = 2.0 * (&a_op * &s.a).amax() * grid.step().powf(0.5) * rgamma(2.5);
            assert!(err < bound, "{err} vs {bound}");
            prev = err;
        }
    }

    #[test]
    fn batched_equals_columnwise() {
        let a_op = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, -1.0, 2.0]);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.0]);
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let all = timestep_propagate(&a_op, order(1.4), grid, &a, &b).unwrap();
        for c in 0..2 {
            let s = SourcePair::new(a.column(c).into_owned(), b.column(c).into_owned()).unwrap();
            let single = solve_timestep(&a_op, &s, order(1.4), grid).unwrap();
            for k in 0..=32 {
                assert!((all[k].column(c) - &single.states[k]).amax() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_non_wave_orders_and_shapes() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let f = FractionalOrder::new(0.5).unwrap();
        assert!(solve_timestep(&scalar(1.0), &pair(1.0, 0.0), f, grid).is_err());
        let s = SourcePair::zeros(2);
        assert!(solve_timestep(&scalar(1.0), &s, order(1.5), grid).is_err());
    }
}
