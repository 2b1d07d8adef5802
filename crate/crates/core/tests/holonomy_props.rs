mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use ppwave::holonomy::{frame_gram, rectangle_loop, resolve_sign_convention, SAMPLER_E_TOL, SAMPLER_S_TOL};
use ppwave::{
    closed_form_transport, curvature_at, g_act, g_inverse, generator_curve, holonomy_sampler, lagrangian_subspace,
    parallel_transport, quotient_transport, riccati_solve, CurveSpec, Element, Error, HillSolution, Model, Point64,
    SignConvention, Transport,
};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

fn random_curve(n: usize, r: &mut ChaCha8Rng) -> CurveSpec<f64> {
    let k = r.gen_range(2..5);
    CurveSpec::polyline((0..k).map(|_| random_point(n, r, 1.5, 1.5)).collect())
}

/// Random elements `(0, r, w)` with `w` in the subspace defined by a random
/// nonzero `B0` and `|w'(0)| <= 2`.
fn lagrangian_sigmas(model: &Model, count: usize, seed: u64) -> Vec<Element> {
    let mut r = rng(seed);
    let m = model.fiber_dim();
    let b0 = random_symmetric_traceless(m, &mut r) + DMatrix::identity(m, m) * 0.3;
    let field = riccati_solve(model, &b0, (-0.1, 0.1)).unwrap();
    let basis = lagrangian_subspace(model, &field).unwrap();
    (0..count)
        .map(|_| {
            let mut w = basis.iter().fold(HillSolution::zero(model), |acc, b| acc.add(&b.scale(r.gen_range(-1.0..1.0))).unwrap());
            let speed = w.w0.norm();
            if speed > 2.0 {
                w = w.scale(2.0 / speed);
            }
            Element::new(0, r.gen_range(-1.0..1.0), w)
        })
        .collect()
}

fn check_transport_invariants(t: &Transport) {
    assert!(t.gram_residual() < 1e-7, "gram residual {:e}", t.gram_residual());
    assert!(t.s_residual() < 1e-9, "S residual {:e}", t.s_residual());
}

#[test]
fn null_direction_is_parallel() {
    let model = random_strict_model(6, 1);
    let mut r = rng(1);
    for _ in 0..20 {
        let curve = random_curve(6, &mut r);
        let p = parallel_transport(&model, &curve, TOL).unwrap();
        let mut ds = DVector::zeros(6);
        ds[1] = 1.0;
        assert!((p.column(1) - ds).amax() < 1e-10);
    }
}

#[test]
fn transport_is_metric_compatible_and_reversible() {
    let model = random_strict_model(5, 2);
    let mut r = rng(2);
    for _ in 0..10 {
        let curve = random_curve(5, &mut r);
        let p = parallel_transport(&model, &curve, TOL).unwrap();
        let (g0, g1) = (model.metric_matrix(curve.start()), model.metric_matrix(curve.end()));
        assert!((p.transpose() * g1 * &p - g0).amax() < 1e-8);
        let back = parallel_transport(&model, &curve.reversed(), TOL).unwrap();
        assert!((back * p - DMatrix::identity(5, 5)).amax() < 1e-8);
    }
    let c = CurveSpec::constant(Point64::origin(5));
    assert_eq!(parallel_transport(&model, &c, TOL).unwrap(), DMatrix::identity(5, 5));
    assert!(parallel_transport(&model, &c, 1e-6).is_err());
}

#[test]
fn generator_curves() {
    let model = random_strict_model(5, 3);
    let e = Element::identity(&model);
    let c = generator_curve(&model, &e).unwrap();
    assert_eq!(c.start(), c.end());
    let k1 = Element::new(1, 0.0, HillSolution::zero(&model));
    assert_eq!(generator_curve(&model, &k1).unwrap().end(), &Point64::new(model.period(), 0.0, DVector::zeros(3)));
    let mut e1 = DVector::zeros(3);
    e1[0] = 1.0;
    let dw = DVector::from_vec(vec![0.7, -0.2, 0.1]);
    let sigma = Element::new(0, 0.0, HillSolution::new(&model, e1.clone(), dw.clone()).unwrap());
    let end = generator_curve(&model, &sigma).unwrap().end().clone();
    assert_eq!(end, Point64::new(0.0, -dw.dot(&e1), e1));
    let back = g_act(&g_inverse(&sigma).unwrap(), &end).unwrap();
    assert!((back.coords() - Point64::origin(5).coords()).amax() < 1e-9);
    let mixed = Element::new(1, 0.5, HillSolution::zero(&model));
    assert_eq!(generator_curve(&model, &mixed).unwrap_err(), Error::NotAGenerator);
}

#[test]
fn period_generators_have_trivial_holonomy() {
    let model = random_strict_model(6, 4);
    for k in [1, 2, -1] {
        let t = quotient_transport(&model, &Element::new(k, 0.0, HillSolution::zero(&model)), TOL).unwrap();
        assert!(t.identity_residual() < 1e-8, "k = {k}: {:e}", t.identity_residual());
    }
    let pure_s = Element::new(0, 1.7, HillSolution::zero(&model));
    assert!(quotient_transport(&model, &pure_s, TOL).unwrap().identity_residual() < 1e-12);
}

#[test]
fn closed_form_matches_numeric_transport() {
    for (n, seed) in [(5, 5), (7, 6)] {
        let model = random_strict_model(n, seed);
        let sigmas = lagrangian_sigmas(&model, 20, seed);
        let (conv, _) = resolve_sign_convention(&model, &sigmas[0], TOL).unwrap();
        assert_eq!(conv, SignConvention::RowPlus);
        for sigma in &sigmas {
            let numeric = quotient_transport(&model, sigma, TOL).unwrap();
            let closed = closed_form_transport(&model, sigma, conv).unwrap();
            let dev = (&numeric.matrix - &closed.matrix).amax();
            assert!(dev < 1e-6, "closed-form deviation {dev:e}");
            check_transport_invariants(&numeric);
            assert!(closed.gram_residual() < 1e-12 && closed.s_residual() == 0.0);
            assert!(numeric.e_block_residual() < 1e-6);
        }
    }
}

#[test]
fn closed_form_entries() {
    let model = random_strict_model(5, 7);
    let alpha = 0.8;
    let sigma = Element::new(0, 0.0, HillSolution::new(&model, DVector::zeros(3), DVector::from_vec(vec![alpha, 0.0, 0.0])).unwrap());
    let m = closed_form_transport(&model, &sigma, SignConvention::RowPlus).unwrap().matrix;
    assert_eq!(m[(0, 1)], 2.0 * alpha);
    assert_eq!(m[(0, 4)], -2.0 * alpha * alpha);
    assert_eq!(m[(1, 4)], -2.0 * alpha);
    let zero = closed_form_transport(&model, &Element::identity(&model), SignConvention::RowPlus).unwrap();
    assert_eq!(zero.identity_residual(), 0.0);
    let k = Element::new(1, 0.0, HillSolution::zero(&model));
    assert_eq!(closed_form_transport(&model, &k, SignConvention::RowPlus).unwrap_err(), Error::NotInSigmaForm);
    let numeric = quotient_transport(&model, &sigma, TOL).unwrap();
    assert!((numeric.matrix - m).amax() < 1e-6);
}

#[test]
fn lattice_transports_commute() {
    let model = random_strict_model(6, 8);
    let sigmas = lagrangian_sigmas(&model, 6, 8);
    let mats: Vec<_> = sigmas.iter().map(|s| quotient_transport(&model, s, TOL).unwrap().matrix).collect();
    for a in &mats {
        for b in &mats {
            assert!((a * b - b * a).amax() < 1e-7);
        }
    }
}

#[test]
fn loops_without_time_extent_are_trivial() {
    let model = random_strict_model(6, 9);
    let mut r = rng(9);
    for _ in 0..10 {
        let base = random_point(6, &mut r, 2.0, 2.0);
        let i = r.gen_range(2..6);
        let c = rectangle_loop(&base, 1, i, 0.5, -0.3);
        let p = parallel_transport(&model, &c, TOL).unwrap();
        assert!((p - DMatrix::identity(6, 6)).amax() < 1e-9);
        let j = if i == 2 { 3 } else { 2 };
        let c = rectangle_loop(&base, i, j, 0.4, 0.6);
        assert!((parallel_transport(&model, &c, TOL).unwrap() - DMatrix::identity(6, 6)).amax() < 1e-9);
    }
}

/// Second-order loop expansion: transport around the `(a, b)` rectangle of
/// sides `h1, h2` is `I - h1 h2 R^k_{lab} + O(h^3)`.
#[test]
fn small_loops_follow_the_curvature() {
    let model = random_strict_model(5, 10);
    let p = Point64::new(0.3, 0.0, DVector::from_vec(vec![1.0, -0.5, 0.8]));
    let bundle = curvature_at(&model, &p);
    let gi = model.inverse_metric(&p);
    let n = 5;
    let oracle = |a: usize, b: usize| {
        DMatrix::from_fn(n, n, |k, l| (0..n).map(|e| gi[(k, e)] * bundle.riemann.get(e, l, a, b)).sum::<f64>())
    };
    for (a, b) in [(0, 2), (0, 3), (2, 0)] {
        let r_ab = oracle(a, b);
        let err = |h: f64| {
            let hol = parallel_transport(&model, &rectangle_loop(&p, a, b, h, h), TOL).unwrap();
            (hol - DMatrix::identity(n, n) + &r_ab * (h * h)).amax()
        };
        let (e1, e2) = (err(2e-2), err(1e-2));
        assert!(r_ab.amax() > 0.1);
        assert!(e1 < 0.05 * r_ab.amax() * 4e-4, "expansion error {e1:e}");
        assert!(e1 / e2 > 6.0, "third-order remainder ratio {}", e1 / e2);
        let t = ppwave::holonomy::loop_holonomy(&model, &rectangle_loop(&p, a, b, 0.05, 0.05), TOL).unwrap();
        check_transport_invariants(&t);
        assert!(t.e_block_residual() < 1e-6);
        assert!(t.identity_residual() > 1e-4);
    }
}

#[test]
fn sampler_reports_the_translation_block() {
    let model = random_strict_model(6, 11);
    let rep = holonomy_sampler(&model, 30, 0.5, 11).unwrap();
    assert_eq!(rep.pass_rate, 1.0, "{rep:?}");
    assert!(rep.max_s_residual <= SAMPLER_S_TOL && rep.max_e_block_residual <= SAMPLER_E_TOL);
    assert!(rep.max_gram_residual < 1e-7);
    assert!(rep.max_identity_residual > 1e-3);
    assert!(holonomy_sampler(&model, 1, 2.0, 0).is_err());
}

#[test]
fn sampler_deviation_is_second_order_in_scale() {
    let model = random_strict_model(5, 12);
    let big = holonomy_sampler(&model, 20, 0.1, 12).unwrap().max_identity_residual;
    let small = holonomy_sampler(&model, 20, 0.05, 12).unwrap().max_identity_residual;
    assert!(big / small > 3.0, "ratio {}", big / small);
}

#[test]
fn frame_gram_is_the_null_pairing() {
    let g = frame_gram::<f64>(5);
    let model = random_strict_model(5, 13);
    let p = Point64::new(0.4, 0.0, DVector::from_vec(vec![0.3, 0.2, -0.1]));
    let fr = ppwave::holonomy::frame_matrix(&model, &p);
    assert!((fr.transpose() * model.metric_matrix(&p) * &fr - g).amax() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transported_null_vector_is_fixed(seed in 0u64..10_000) {
        let model = random_strict_model(5, seed % 11);
        let mut r = rng(seed);
        let curve = random_curve(5, &mut r);
        let p = parallel_transport(&model, &curve, TOL).unwrap();
        prop_assert!((p[(1, 1)] - 1.0).abs() < 1e-10);
        prop_assert!(p.column(1).iter().enumerate().all(|(i, x)| i == 1 || x.abs() < 1e-10));
        // The t-component of any transported vector is constant.
        prop_assert!((p.row(0) - DMatrix::identity(5, 5).row(0)).amax() < 1e-10);
    }
}
