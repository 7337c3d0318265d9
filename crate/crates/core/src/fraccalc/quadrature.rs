//! Product-integration quadrature for the Riemann-Liouville integral and the
//! Caputo derivative on a uniform grid.
//!
//! The integrand is replaced by its piecewise-linear interpolant and the
//! kernel `(t - s)^(alpha - 1)` is integrated exactly against each hat
//! function, which gives
//!
//! ```text
//! J^a v(t_k) ~ dt^a / G(a + 2) * ( w0_k v_0 + sum_{j=1}^{k-1} c_{k-j} v_j + v_k )
//! w0_k = (k - 1)^(a+1) - (k - 1 - a) k^a
//! c_m  = (m + 1)^(a+1) - 2 m^(a+1) + (m - 1)^(a+1)
//! ```
//!
//! The rule is exact for piecewise-linear `v`.

use statrs::function::gamma::gamma;

use super::grid::{FractionalOrder, Sample, TimeSeries};
use super::FracError;

// Beyond this offset the weights are evaluated by their binomial series in 1/m,
// which avoids cancelling the leading powers.
const SERIES_THRESHOLD: usize = 8;

/// Generalised binomial coefficients `C(p, j)` for `j = 0..n`.
fn binomials(p: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 1.0;
    for j in 0..n {
        out.push(c);
        c *= (p - j as f64) / (j as f64 + 1.0);
    }
    out
}

/// `(m + 1)^p - 2 m^p + (m - 1)^p` for `m >= 1`.
fn centered_power_difference(p: f64, m: usize, binom: &[f64]) -> f64 {
    let mf = m as f64;
    if m < SERIES_THRESHOLD {
        return (mf + 1.0).powf(p) - 2.0 * mf.powf(p) + (mf - 1.0).powf(p);
    }
    // m^p * 2 * sum_{j>=1} C(p, 2j) m^(-2j)
    let x2 = 1.0 / (mf * mf);
    let mut sum = 0.0;
    let mut xp = x2;
    for j in 1.. {
        let idx = 2 * j;
        if idx >= binom.len() {
            break;
        }
        let term = binom[idx] * xp;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        xp *= x2;
    }
    2.0 * mf.powf(p) * sum
}

/// `(k - 1)^(a+1) - (k - 1 - a) k^a` for `k >= 1`.
fn start_weight(alpha: f64, k: usize, binom: &[f64]) -> f64 {
    let kf = k as f64;
    let p = alpha + 1.0;
    if k < SERIES_THRESHOLD {
        return (kf - 1.0).powf(p) - (kf - 1.0 - alpha) * kf.powf(alpha);
    }
    // k^p * sum_{j>=2} C(p, j) (-1/k)^j
    let x = -1.0 / kf;
    let mut sum = 0.0;
    let mut xp = x * x;
    for &c in binom.iter().skip(2) {
        let term = c * xp;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        xp *= x;
    }
    kf.powf(p) * sum
}

/// Precomputed product-integration weights of `J^alpha` for a grid with `K` steps.
#[derive(Debug, Clone)]
pub struct RlWeights {
    alpha: f64,
    scale: f64,
    start: Vec<f64>,
    lag: Vec<f64>,
}

impl RlWeights {
    pub fn new(alpha: f64, step: f64, steps: usize) -> Self {
        let binom = binomials(alpha + 1.0, 40);
        let mut start = vec![0.0; steps + 1];
        let mut lag = vec![0.0; steps + 1];
        for k in 1..=steps {
            start[k] = start_weight(alpha, k, &binom);
            lag[k] = centered_power_difference(alpha + 1.0, k, &binom);
        }
        Self {
            alpha,
            scale: step.powf(alpha) / gamma(alpha + 2.0),
            start,
            lag,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `dt^alpha / Gamma(alpha + 2)`; the weight of the newest node is exactly this.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Unscaled weight of `v_0` in the sum for node `k >= 1`.
    pub fn start(&self, k: usize) -> f64 {
        self.start[k]
    }

    /// Unscaled weight of `v_j` at node `k` with `m = k - j`, `1 <= m < k`.
    pub fn lag(&self, m: usize) -> f64 {
        self.lag[m]
    }

    pub fn steps(&self) -> usize {
        self.start.len() - 1
    }

    /// Applies the rule to samples `v_0..=v_K`.
    pub fn apply<T: Sample>(&self, v: &[T]) -> Vec<T> {
        let steps = v.len() - 1;
        let mut out = vec![T::zero(); steps + 1];
        for k in 1..=steps {
            let mut acc = v[0] * self.start[k] + v[k];
            for j in 1..k {
                acc = acc + v[j] * self.lag[k - j];
            }
            out[k] = acc * self.scale;
        }
        out
    }
}

/// Riemann-Liouville integral `J^alpha v` on the grid of `v`, for `0 < alpha <= 2`.
pub fn rl_integral<T: Sample>(
    v: &TimeSeries<T>,
    order: FractionalOrder,
) -> Result<TimeSeries<T>, FracError> {
    if !v.is_finite() {
        return Err(FracError::NonFinite);
    }
    let grid = *v.grid();
    let weights = RlWeights::new(order.value(), grid.step(), grid.steps());
    TimeSeries::new(grid, weights.apply(v.values()))
}

/// Second-derivative samples: central differences inside, one-sided
/// second-order four-point formulas at both ends.
pub(crate) fn second_differences<T: Sample>(v: &[T], step: f64) -> Vec<T> {
    let n = v.len();
    let inv = 1.0 / (step * step);
    let mut d2 = vec![T::zero(); n];
    for k in 1..n - 1 {
        d2[k] = (v[k + 1] - v[k] * 2.0 + v[k - 1]) * inv;
    }
    let one_sided = |a: T, b: T, c: T, d: T| (a * 2.0 - b * 5.0 + c * 4.0 - d) * inv;
    d2[0] = one_sided(v[0], v[1], v[2], v[3]);
    d2[n - 1] = one_sided(v[n - 1], v[n - 2], v[n - 3], v[n - 4]);
    d2
}

/// Caputo derivative `d^alpha v = J^(2 - alpha) v''` for `1 < alpha < 2`.
///
/// First order in `dt` for smooth `v`; exact for quadratics.
pub fn caputo_derivative<T: Sample>(
    v: &TimeSeries<T>,
    order: FractionalOrder,
) -> Result<TimeSeries<T>, FracError> {
    if !order.is_wave() {
        return Err(FracError::OrderOutOfRange {
            alpha: order.value(),
            range: "(1, 2)",
        });
    }
    let grid = *v.grid();
    if grid.steps() < 3 {
        return Err(FracError::InvalidGrid(format!(
            "the Caputo derivative needs at least 3 steps, got {}",
            grid.steps()
        )));
    }
    if !v.is_finite() {
        return Err(FracError::NonFinite);
    }
    let d2 = second_differences(v.values(), grid.step());
    let weights = RlWeights::new(2.0 - order.value(), grid.step(), grid.steps());
    TimeSeries::new(grid, weights.apply(&d2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::TimeGrid;
    use proptest::prelude::*;

    fn order(a: f64) -> FractionalOrder {
        FractionalOrder::new(a).unwrap()
    }

    // Composite trapezoid on a graded mesh s = t (1 - (1 - u)^q), which
    // flattens the (t - s)^(alpha - 1) endpoint singularity.
    fn rl_oracle(f: impl Fn(f64) -> f64, alpha: f64, t: f64) -> f64 {
        let q = 2.0 / alpha + 2.0;
        let n = 200_000;
        // (t - s)^(alpha - 1) ds = t^alpha q (1 - u)^(q alpha - 1) du
        let g = |u: f64| {
            let s = t * (1.0 - (1.0 - u).powf(q));
            t.powf(alpha) * q * (1.0 - u).powf(q * alpha - 1.0) * f(s)
        };
        let h = 1.0 / n as f64;
        let mut acc = 0.5 * (g(0.0) + g(1.0));
        for i in 1..n {
            acc += g(i as f64 * h);
        }
        acc * h / gamma(alpha)
    }

    #[test]
    fn weights_series_matches_direct_at_threshold() {
        let binom = binomials(2.5, 40);
        for m in [8usize, 9, 20] {
            let mf = m as f64;
            let direct = (mf + 1.0).powf(2.5) - 2.0 * mf.powf(2.5) + (mf - 1.0).powf(2.5);
            let series = centered_power_difference(2.5, m, &binom);
            assert!((direct - series).abs() < 1e-12 * direct.abs(), "{m}");
            let a = 1.5;
            let direct = (mf - 1.0).powf(a + 1.0) - (mf - 1.0 - a) * mf.powf(a);
            let series = start_weight(a, m, &binom);
            assert!((direct - series).abs() < 1e-11 * direct.abs(), "{m}");
        }
    }

    #[test]
    fn first_order_integral_of_one_is_t() {
        let g = TimeGrid::new(2.0, 16).unwrap();
        let v = TimeSeries::from_fn(g, |_| 1.0);
        let j = rl_integral(&v, order(1.0)).unwrap();
        for (t, val) in g.nodes().zip(j.values()) {
            assert!((val - t).abs() < 1e-14);
        }
    }

    #[test]
    fn half_integral_of_t() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let v = TimeSeries::from_fn(g, |t| t);
        let j = rl_integral(&v, order(0.5)).unwrap();
        let expected = 1.0 / gamma(2.5);
        assert!((expected - 0.752_252_778_063_675).abs() < 1e-14);
        // oracle: the defining integral by graded trapezoid quadrature
        let oracle = rl_oracle(|s| s, 0.5, 1.0);
        assert!((oracle - expected).abs() < 1e-8);
        assert!((j.values()[10] - expected).abs() < 1e-13);
    }

    #[test]
    fn integral_of_zero_is_zero() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let j = rl_integral(&TimeSeries::<f64>::zeros(g), order(1.3)).unwrap();
        assert!(j.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn integral_of_smooth_function_converges_to_oracle() {
        let f = |s: f64| (2.0 * s).sin();
        let oracle = rl_oracle(f, 0.7, 1.0);
        let mut prev = f64::INFINITY;
        for k in [32usize, 64, 128] {
            let g = TimeGrid::new(1.0, k).unwrap();
            let j = rl_integral(&TimeSeries::from_fn(g, f), order(0.7)).unwrap();
            let err = (j.values()[k] - oracle).abs();
            assert!(err < prev / 3.0, "k={k} err={err}");
            prev = err;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn rejects_non_finite_input() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let v = TimeSeries::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).unwrap();
        assert!(matches!(rl_integral(&v, order(0.5)), Err(FracError::NonFinite)));
    }

    #[test]
    fn caputo_annihilates_affine() {
        let g = TimeGrid::new(1.0, 20).unwrap();
        let v = TimeSeries::from_fn(g, |t| 3.0 - 2.0 * t);
        let d = caputo_derivative(&v, order(1.4)).unwrap();
        assert!(d.sup_norm() < 1e-10);
    }

    #[test]
    fn caputo_of_t_squared() {
        let alpha = 1.5;
        let g = TimeGrid::new(1.0, 64).unwrap();
        let v = TimeSeries::from_fn(g, |t| t * t);
        let d = caputo_derivative(&v, order(alpha)).unwrap();
        // oracle: defining integral with v'' = 2
        let oracle = rl_oracle(|_| 2.0, 2.0 - alpha, 1.0);
        let exact = 2.0 / gamma(3.0 - alpha);
        assert!((oracle - exact).abs() < 1e-8);
        for (t, val) in g.nodes().zip(d.values()) {
            assert!((val - 2.0 * t.powf(2.0 - alpha) / gamma(3.0 - alpha)).abs() < 1e-9);
        }
    }

    #[test]
    fn caputo_inverts_rl_under_refinement() {
        let alpha = 1.3;
        let w = |t: f64| t * (3.0 * t).cos();
        let mut errs = Vec::new();
        for k in [64usize, 128, 256] {
            let g = TimeGrid::new(1.0, k).unwrap();
            let v = rl_integral(&TimeSeries::from_fn(g, w), order(alpha)).unwrap();
            let d = caputo_derivative(&v, order(alpha)).unwrap();
            errs.push(d.max_distance(&TimeSeries::from_fn(g, w)).unwrap());
        }
        assert!(errs[1] < 0.6 * errs[0] && errs[2] < 0.6 * errs[1], "{errs:?}");
    }

    #[test]
    fn caputo_rejects_bad_order_and_short_grid() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let v = TimeSeries::from_fn(g, |t| t);
        assert!(caputo_derivative(&v, order(1.5)).is_err());
        let g = TimeGrid::new(1.0, 8).unwrap();
        let v = TimeSeries::from_fn(g, |t| t);
        assert!(caputo_derivative(&v, order(0.5)).is_err());
        assert!(caputo_derivative(&v, order(2.0)).is_err());
    }

    #[test]
    fn semigroup_error_shrinks() {
        let f = |t: f64| (t).exp() - 1.0;
        let mut prev = f64::INFINITY;
        for k in [32usize, 64, 128] {
            let g = TimeGrid::new(1.0, k).unwrap();
            let v = TimeSeries::from_fn(g, f);
            let ab = rl_integral(&rl_integral(&v, order(0.4)).unwrap(), order(0.8)).unwrap();
            let direct = rl_integral(&v, order(1.2)).unwrap();
            let err = ab.max_distance(&direct).unwrap();
            assert!(err < prev, "k={k}");
            assert!(err <= 0.5 * g.step());
            prev = err;
        }
    }

    proptest! {
        #[test]
        fn operators_are_linear(
            c1 in -3.0f64..3.0, c2 in -3.0f64..3.0,
            p in 0.1f64..4.0, q in 0.1f64..4.0, alpha in 1.05f64..1.95,
        ) {
            let g = TimeGrid::new(1.0, 24).unwrap();
            let u = TimeSeries::from_fn(g, |t| (p * t).sin());
            let v = TimeSeries::from_fn(g, |t| t.powf(q));
            let mix = u.combine(c1, &v, c2).unwrap();
            let ord = order(alpha);
            let lhs = rl_integral(&mix, ord).unwrap();
            let rhs = rl_integral(&u, ord).unwrap().combine(c1, &rl_integral(&v, ord).unwrap(), c2).unwrap();
            prop_assert!(lhs.max_distance(&rhs).unwrap() < 1e-12);
            let lhs = caputo_derivative(&mix, ord).unwrap();
            let rhs = caputo_derivative(&u, ord).unwrap().combine(c1, &caputo_derivative(&v, ord).unwrap(), c2).unwrap();
            prop_assert!(lhs.max_distance(&rhs).unwrap() < 1e-8 * (1.0 + lhs.sup_norm()));
        }
    }
}
