use fracwave::elliptic::{assemble, subdomain_indices, CoefficientField, Mesh, SubBox};
use fracwave::fraccalc::{mittag_leffler_real, FractionalOrder, TimeGrid};
use fracwave::solver::{solve_resolvent, solve_spectral_oracle, solve_timestep, SourcePair, TalbotContour};
use fracwave::spectral::{eigendecompose, riesz_decomposition, DEFAULT_CONTOUR_NODES};
use fracwave::uniqueness::{
    build_observation_map, injectivity_report, invert_source, relative_error, uniform_times, ObservationRoute,
    ObservationSetup, Regularization, Verdict,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn order(a: f64) -> FractionalOrder {
    FractionalOrder::wave(a).unwrap()
}

#[test]
fn two_dimensional_routes_agree() {
    let mesh = Mesh::rectangle([0.0, 1.0], [0.0, 1.0], [5, 4]).unwrap();
    let coeffs = CoefficientField::from_fn(
        &mesh,
        |x, y| [[1.0 + 0.3 * x, 0.1], [0.1, 1.0 + 0.2 * y]],
        |x, _| [1.0 - x, 0.5],
        |_, y| y,
        "variable",
    );
    let op = assemble(&mesh, &coeffs).unwrap();
    let s = SourcePair::new(
        DVector::from_vec(mesh.sample(|x, y| (3.0 * x).sin() * y * (1.0 - y))),
        DVector::from_vec(mesh.sample(|x, y| x * y)),
    )
    .unwrap();
    let times = [0.1, 0.4];
    let eig = eigendecompose(op.matrix(), None).unwrap();
    let data = riesz_decomposition(op.matrix(), &eig, DEFAULT_CONTOUR_NODES).unwrap();
    let spectral = solve_spectral_oracle(&data, &s, order(1.7), &times).unwrap();
    let resolvent = solve_resolvent(op.matrix(), &s, order(1.7), &times, &TalbotContour::default()).unwrap();
    let stepped = solve_timestep(op.matrix(), &s, order(1.7), TimeGrid::new(0.4, 2000).unwrap()).unwrap();
    assert!(resolvent.relative_difference(&spectral, &times).unwrap() < 1e-7);
    assert!(stepped.relative_difference(&spectral, &times).unwrap() < 2e-3);
}

#[test]
fn pure_affine_motion_without_operator() {
    let a_op = DMatrix::zeros(3, 3);
    let s = SourcePair::new(DVector::from_vec(vec![1.0, -2.0, 0.5]), DVector::from_vec(vec![0.0, 1.0, 3.0])).unwrap();
    let u = solve_timestep(&a_op, &s, order(1.3), TimeGrid::new(2.0, 40).unwrap()).unwrap();
    for (t, state) in u.times.iter().zip(&u.states) {
        assert!((state - (&s.a + &s.b * *t)).amax() < 1e-12);
    }
}

#[test]
fn full_observation_inverts_cleanly() {
    let mesh = Mesh::unit_interval(10).unwrap();
    let coeffs = CoefficientField::constant(&mesh, [[1.0, 0.0], [0.0, 1.0]], [2.0, 0.0], 1.0);
    let op = assemble(&mesh, &coeffs).unwrap();
    let omega = subdomain_indices(&mesh, &SubBox::interval(0.0, 1.0)).unwrap();
    assert_eq!(omega.len(), 10);
    let setup = ObservationSetup::new(omega, uniform_times(1.0, 4), ObservationRoute::default()).unwrap();
    let map = build_observation_map(op.matrix(), order(1.5), &setup).unwrap();
    assert_eq!(injectivity_report(&map).verdict, Verdict::Injective);
    let s = SourcePair::new(
        DVector::from_vec(mesh.sample(|x, _| x * (1.0 - x))),
        DVector::from_vec(mesh.sample(|x, _| (6.0 * x).cos())),
    )
    .unwrap();
    let lambda = 1e-16 * map.singular_values[0].powi(2);
    let rec = invert_source(&map, &map.apply(&s.stacked()), Regularization::Tikhonov { lambda: Some(lambda) }).unwrap();
    assert!(relative_error(&s, &rec.source) < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scalar_modes_match_mittag_leffler(lambda in 0.1f64..20.0, alpha in 1.1f64..1.9, t in 0.1f64..2.0) {
        let a_op = DMatrix::from_element(1, 1, lambda);
        let s = SourcePair::new(DVector::from_element(1, 1.0), DVector::from_element(1, 1.0)).unwrap();
        let u = solve_resolvent(&a_op, &s, order(alpha), &[t], &TalbotContour::default()).unwrap();
        let z = -lambda * t.powf(alpha);
        let exact = mittag_leffler_real(alpha, 1.0, z).unwrap() + t * mittag_leffler_real(alpha, 2.0, z).unwrap();
        prop_assert!((u.states[0][0] - exact).abs() < 1e-8);
    }

    #[test]
    fn resolvent_and_spectral_agree_on_random_operators(
        entries in proptest::collection::vec(-1.0f64..1.0, 16),
        alpha in 1.1f64..1.9,
    ) {
        // diagonally dominant with positive diagonal keeps the spectrum in Re > 0
        let a_op = DMatrix::from_fn(4, 4, |i, j| if i == j { 6.0 + 2.0 * i as f64 } else { entries[4 * i + j] });
        let s = SourcePair::new(DVector::from_row_slice(&entries[..4]), DVector::from_row_slice(&entries[4..8])).unwrap();
        let times = [0.3, 1.0];
        let eig = eigendecompose(&a_op, None).unwrap();
        let data = riesz_decomposition(&a_op, &eig, DEFAULT_CONTOUR_NODES).unwrap();
        let spectral = solve_spectral_oracle(&data, &s, order(alpha), &times).unwrap();
        let resolvent = solve_resolvent(&a_op, &s, order(alpha), &times, &TalbotContour::default()).unwrap();
        for k in 0..2 {
            prop_assert!((&spectral.states[k] - &resolvent.states[k]).amax() < 1e-8 * (1.0 + s.stacked().amax()));
        }
    }
}
