mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use ppwave::group::g_act_jacobian;
use ppwave::hill::omega_initial;
use ppwave::{
    centralizer_basis, g_act, g_act_differential, g_compose, g_identity, g_inverse, heis_bridge, heis_mul,
    isometry_residual, lagrangian_subspace, pi_automorphism, riccati_solve, rotation_flow, shift, sigma_validate,
    Element, Error, HeisElement, HillSolution, Model, Point64, SigmaLattice, Tangent64,
};
use ppwave::group::isometry_residual_with;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_element(model: &Model, r: &mut ChaCha8Rng, kmax: i64) -> Element {
    let m = model.fiber_dim();
    let u = HillSolution::new(model, random_vec(m, r, 1.0), random_vec(m, r, 1.0)).unwrap();
    Element::new(r.gen_range(-kmax..=kmax), r.gen_range(-2.0..2.0), u)
}

fn sigma_element(model: &Model, r: &mut ChaCha8Rng) -> Element {
    let mut g = random_element(model, r, 0);
    g.k = 0;
    g
}

fn random_samples(model: &Model, r: &mut ChaCha8Rng, count: usize) -> Vec<(Point64, Tangent64, Tangent64)> {
    let n = model.n();
    (0..count)
        .map(|_| {
            let p = random_point(n, r, 2.0, 2.0);
            let x = Tangent64::from_components(p.clone(), random_vec(n, r, 1.0).as_slice());
            let y = Tangent64::from_components(p.clone(), random_vec(n, r, 1.0).as_slice());
            (p, x, y)
        })
        .collect()
}

fn point_distance(a: &Point64, b: &Point64) -> f64 {
    (a.coords() - b.coords()).amax()
}

#[test]
fn identity_laws() {
    let model = stable_model(5);
    let mut r = rng(1);
    let e = g_identity(&model);
    for _ in 0..100 {
        let g = random_element(&model, &mut r, 3);
        assert!(g_compose(&g, &e).unwrap().distance(&g) < 1e-12);
        assert!(g_compose(&e, &g).unwrap().distance(&g) < 1e-12);
    }
}

#[test]
fn inverse_solves_the_defining_equations() {
    let model = stable_model(6);
    let mut r = rng(2);
    let e = g_identity(&model);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let g = random_element(&model, &mut r, 3);
        let gi = g_inverse(&g).unwrap();
        let left = g_compose(&gi, &g).unwrap();
        let right = g_compose(&g, &gi).unwrap();
        assert_eq!(left.k, 0);
        assert_eq!(right.k, 0);
        worst = worst.max(left.distance(&e)).max(right.distance(&e));
        // Independent check of the two component equations.
        let third = shift(&g.u, -gi.k).unwrap().add(&gi.u).unwrap();
        assert!(third.initial_data().amax() < 1e-9);
        let second = g.x + gi.x - omega_initial(&g.u, &shift(&gi.u, gi.k).unwrap()).unwrap();
        assert!(second.abs() < 1e-9);
    }
    assert!(worst < 1e-9, "inverse defect {worst:e}");
}

#[test]
fn associativity_sweep() {
    let model = stable_model(5);
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (a, b, c) = (random_element(&model, &mut r, 3), random_element(&model, &mut r, 3), random_element(&model, &mut r, 3));
        let lhs = g_compose(&g_compose(&a, &b).unwrap(), &c).unwrap();
        let rhs = g_compose(&a, &g_compose(&b, &c).unwrap()).unwrap();
        worst = worst.max(lhs.distance(&rhs));
    }
    assert!(worst < 1e-9, "associativity defect {worst:e}");
}

#[test]
fn action_examples() {
    let model = random_strict_model(5, 4);
    let mut r = rng(4);
    let e = g_identity(&model);
    let trans = Element::new(0, 1.25, HillSolution::zero(&model));
    for _ in 0..20 {
        let p = random_point(5, &mut r, 2.0, 2.0);
        assert_eq!(g_act(&e, &p).unwrap(), p);
        let q = g_act(&trans, &p).unwrap();
        assert!(q.t == p.t && (q.s - p.s - 1.25).abs() < 1e-15 && q.v == p.v);
    }
}

#[test]
fn action_is_compatible_with_the_product() {
    let model = stable_model(6);
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let (g1, g2) = (random_element(&model, &mut r, 2), random_element(&model, &mut r, 2));
        let p = random_point(6, &mut r, 2.0, 2.0);
        let lhs = g_act(&g1, &g_act(&g2, &p).unwrap()).unwrap();
        let rhs = g_act(&g_compose(&g1, &g2).unwrap(), &p).unwrap();
        worst = worst.max(point_distance(&lhs, &rhs));
    }
    assert!(worst < 1e-8, "action defect {worst:e}");
}

#[test]
fn differential_matches_differences() {
    let model = random_strict_model(5, 6);
    let mut r = rng(6);
    let h = 1e-5;
    for _ in 0..20 {
        let g = random_element(&model, &mut r, 2);
        let p = random_point(5, &mut r, 1.0, 2.0);
        let j = g_act_jacobian(&g, &p).unwrap();
        for b in 0..5 {
            let hi = g_act(&g, &p.shifted(b, h)).unwrap().coords();
            let lo = g_act(&g, &p.shifted(b, -h)).unwrap().coords();
            let col = (hi - lo) / (2.0 * h);
            assert!((j.column(b) - col).amax() < 1e-6 * (1.0 + j.amax()));
        }
        let ds = g_act_differential(&g, &Tangent64::coordinate(p.clone(), 1)).unwrap();
        assert_eq!(ds.components(), Tangent64::coordinate(ds.base.clone(), 1).components());
    }
    let e = g_identity(&model);
    let p = random_point(5, &mut r, 1.0, 2.0);
    assert_eq!(g_act_jacobian(&e, &p).unwrap(), DMatrix::identity(5, 5));
}

#[test]
fn actions_are_isometries() {
    let model = random_strict_model(6, 7);
    let mut r = rng(7);
    let b0 = random_symmetric_traceless(4, &mut r) * 0.5;
    let field = riccati_solve(&model, &b0, (-0.1, 0.1)).unwrap();
    let basis = lagrangian_subspace(&model, &field).unwrap();
    let samples = random_samples(&model, &mut r, 100);
    assert_eq!(isometry_residual(&g_identity(&model), &samples).unwrap(), 0.0);
    for _ in 0..5 {
        let w = basis.iter().fold(HillSolution::zero(&model), |acc, b| acc.add(&b.scale(r.gen_range(-1.0..1.0))).unwrap());
        let g = Element::new(r.gen_range(-2..=2), r.gen_range(-2.0..2.0), w);
        let res = isometry_residual(&g, &samples).unwrap();
        assert!(res < 1e-7, "residual {res:e}");
        let generic = random_element(&model, &mut r, 2);
        let res = isometry_residual(&generic, &samples).unwrap();
        assert!(res < 1e-7, "generic residual {res:e}");
    }
}

#[test]
fn mutated_action_is_detected() {
    let model = random_strict_model(5, 8);
    let mut r = rng(8);
    let samples = random_samples(&model, &mut r, 100);
    let g = random_element(&model, &mut r, 1);
    // Drop the <u', u> term and differentiate the mutant numerically.
    let mutant = |p: &Point64| {
        let (u, du) = g.u.eval(p.t);
        Point64::new(p.t + g.k as f64 * model.period(), p.s + g.x - 2.0 * du.dot(&p.v), &p.v + u)
    };
    let h = 1e-6;
    let res = isometry_residual_with(
        &model,
        |p| {
            let mut j = DMatrix::zeros(5, 5);
            for b in 0..5 {
                j.set_column(b, &((mutant(&p.shifted(b, h)).coords() - mutant(&p.shifted(b, -h)).coords()) / (2.0 * h)));
            }
            Ok((mutant(p), j))
        },
        &samples,
    )
    .unwrap();
    assert!(res > 1e-2, "mutant residual {res:e}");
}

#[test]
fn operands_from_different_models_are_rejected() {
    let a = stable_model(5);
    let b = random_strict_model(5, 9);
    let err = g_compose(&g_identity(&a), &g_identity(&b)).unwrap_err();
    assert_eq!(err, Error::ModelMismatch);
}

#[test]
fn heisenberg_product_matches_matrices() {
    let mut r = rng(10);
    for _ in 0..100 {
        let h1 = HeisElement { a: random_vec(3, &mut r, 2.0), b: random_vec(3, &mut r, 2.0), c: r.gen_range(-2.0..2.0) };
        let h2 = HeisElement { a: random_vec(3, &mut r, 2.0), b: random_vec(3, &mut r, 2.0), c: r.gen_range(-2.0..2.0) };
        let prod = heis_mul(&h1, &h2).to_matrix();
        assert!((prod - h1.to_matrix() * h2.to_matrix()).amax() < 1e-12);
    }
}

#[test]
fn bridge_is_a_homomorphism() {
    let model = random_strict_model(6, 11);
    let mut r = rng(11);
    let id = heis_bridge(&g_identity(&model)).unwrap();
    assert_eq!(id, HeisElement::identity(4));
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (g1, g2) = (sigma_element(&model, &mut r), sigma_element(&model, &mut r));
        let lhs = heis_bridge(&g_compose(&g1, &g2).unwrap()).unwrap();
        let rhs = heis_mul(&heis_bridge(&g1).unwrap(), &heis_bridge(&g2).unwrap());
        worst = worst.max(lhs.distance(&rhs));
    }
    assert!(worst < 1e-9, "bridge defect {worst:e}");
    let g = random_element(&model, &mut r, 0);
    let shifted = Element::new(1, g.x, g.u.clone());
    assert_eq!(heis_bridge(&shifted).unwrap_err(), Error::NotInSigmaForm);
}

#[test]
fn rotation_automorphism_preserves_the_product() {
    let mut r = rng(12);
    let f = ppwave::FourierSeries::new(1.0, 0.3, vec![(1.0, 0.0)]).unwrap();
    let model = ppwave::build_model(7, f, diag(&[1.0, 1.0, 1.0, -1.5, -1.5]), ppwave::Mode::Strict).unwrap();
    let basis = centralizer_basis(model.a());
    assert_eq!(basis.dim(), 4);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let fm = basis.matrices.iter().fold(DMatrix::zeros(5, 5), |acc, b| acc + b * r.gen_range(-2.0..2.0));
        let h1 = HeisElement { a: random_vec(5, &mut r, 2.0), b: random_vec(5, &mut r, 2.0), c: r.gen_range(-2.0..2.0) };
        let h2 = HeisElement { a: random_vec(5, &mut r, 2.0), b: random_vec(5, &mut r, 2.0), c: r.gen_range(-2.0..2.0) };
        let lhs = heis_mul(&pi_automorphism(&model, &fm, &h1).unwrap(), &pi_automorphism(&model, &fm, &h2).unwrap());
        let rhs = pi_automorphism(&model, &fm, &heis_mul(&h1, &h2)).unwrap();
        worst = worst.max(lhs.distance(&rhs));
        // pi(exp F) is the matrix rotation applied to both vector slots.
        let e = rotation_flow(&fm, 1.0).unwrap();
        let img = pi_automorphism(&model, &fm, &h1).unwrap();
        assert!((img.a - &e * &h1.a).amax() < 1e-12 && img.c == h1.c);
    }
    assert!(worst < 1e-9, "automorphism defect {worst:e}");
    let bad = DMatrix::from_fn(5, 5, |i, j| if i == 0 && j == 4 { 1.0 } else if i == 4 && j == 0 { -1.0 } else { 0.0 });
    assert!(matches!(pi_automorphism(&model, &bad, &HeisElement::identity(5)), Err(Error::NonCommutingF(_))));
}

#[test]
fn lagrangian_elements_commute() {
    let model = random_strict_model(6, 13);
    let mut r = rng(13);
    let b0 = random_symmetric_traceless(4, &mut r);
    let field = riccati_solve(&model, &b0, (-0.1, 0.1)).unwrap();
    let basis = lagrangian_subspace(&model, &field).unwrap();
    let random_l = |r: &mut ChaCha8Rng| {
        let w = basis.iter().fold(HillSolution::zero(&model), |acc, b| acc.add(&b.scale(r.gen_range(-1.0..1.0))).unwrap());
        Element::new(0, r.gen_range(-2.0..2.0), w)
    };
    for _ in 0..200 {
        let (a, b) = (random_l(&mut r), random_l(&mut r));
        let ab = g_compose(&a, &b).unwrap();
        let ba = g_compose(&b, &a).unwrap();
        assert!(ab.distance(&ba) < 1e-9);
    }
}

#[test]
fn lattice_validation() {
    let n = 6;
    let model = random_strict_model(n, 14);
    let mut r = rng(14);
    let b0 = random_symmetric_traceless(n - 2, &mut r);
    let field = riccati_solve(&model, &b0, (-0.1, 0.1)).unwrap();
    let mut generators: Vec<(f64, HillSolution<f64>)> =
        lagrangian_subspace(&model, &field).unwrap().into_iter().map(|w| (0.0, w)).collect();
    generators.push((1.0, HillSolution::zero(&model)));
    let rep = sigma_validate(&SigmaLattice { generators }, &b0).unwrap();
    assert!(rep.abelian_ok && rep.in_l_ok && rep.full_rank, "{rep:?}");
    assert_eq!(rep.rank, n - 1);

    let mut e1 = DVector::zeros(n - 2);
    e1[0] = 1.0;
    let w1 = HillSolution::new(&model, DVector::zeros(n - 2), e1.clone()).unwrap();
    let w2 = HillSolution::new(&model, e1, DVector::zeros(n - 2)).unwrap();
    assert!((omega_initial(&w1, &w2).unwrap() - 1.0).abs() < 1e-15);
    let rep = sigma_validate(&SigmaLattice { generators: vec![(0.0, w1), (0.0, w2)] }, &b0).unwrap();
    assert!(!rep.abelian_ok);
    assert!((rep.max_commutator - 2.0).abs() < 1e-12);
    assert!(!rep.full_rank);

    let empty = SigmaLattice::<f64> { generators: vec![] };
    assert!(matches!(sigma_validate(&empty, &b0), Err(Error::RankDeficient { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn period_shifts_act_by_translation_in_t(seed in 0u64..10_000, k in -4i64..=4) {
        let model = stable_model(5);
        let mut r = rng(seed);
        let g = Element::new(k, 0.0, HillSolution::zero(&model));
        let p = random_point(5, &mut r, 2.0, 2.0);
        let q = g_act(&g, &p).unwrap();
        prop_assert!((q.t - p.t - k as f64 * model.period()).abs() < 1e-12);
        prop_assert_eq!(q.s, p.s);
        // kappa is periodic, so the metric at q equals the metric at p.
        prop_assert!((model.kappa(&q) - model.kappa(&p)).abs() < 1e-9 * (1.0 + model.kappa(&p).abs()));
    }

    #[test]
    fn inverse_is_involutive(seed in 0u64..10_000) {
        let model = stable_model(5);
        let mut r = rng(seed);
        let g = random_element(&model, &mut r, 3);
        let gii = g_inverse(&g_inverse(&g).unwrap()).unwrap();
        prop_assert!(gii.distance(&g) < 1e-9);
    }
}
