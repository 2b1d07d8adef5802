//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ppwave::{build_model, FourierSeries, Mode, Model, Point64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn diag(xs: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(xs))
}

pub fn random_symmetric_traceless<R: Rng>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    let sym = (&raw + raw.transpose()) * 0.5;
    let tr = sym.trace() / m as f64;
    sym - DMatrix::identity(m, m) * tr
}

/// Strict model with random two-mode profile of period 2 and random operator.
pub fn random_strict_model(n: usize, seed: u64) -> Model {
    let mut r = rng(seed);
    let f = FourierSeries::new(
        2.0,
        r.gen_range(-1.0..1.0),
        vec![(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)), (r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5))],
    )
    .unwrap();
    build_model(n, f, random_symmetric_traceless(n - 2, &mut r), Mode::Strict).unwrap()
}

/// Strict model whose fiber equations are all parametrically stable:
/// `f = -2 + cos(2 pi t) / 2`, spectrum of `A` in `{1, 0, -1}`.
pub fn stable_model(n: usize) -> Model {
    let f = FourierSeries::new(1.0, -2.0, vec![(0.5, 0.0)]).unwrap();
    let m = n - 2;
    let mut d = vec![0.0; m];
    d[0] = 1.0;
    d[m - 1] = -1.0;
    build_model(n, f, diag(&d), Mode::Strict).unwrap()
}

pub fn relaxed(n: usize, fourier: FourierSeries<f64>, a: DMatrix<f64>) -> Model {
    build_model(n, fourier, a, Mode::Relaxed).unwrap()
}

pub fn random_point<R: Rng>(n: usize, rng: &mut R, t_range: f64, v_range: f64) -> Point64 {
    Point64::new(
        rng.gen_range(-t_range..t_range),
        rng.gen_range(-5.0..5.0),
        DVector::from_fn(n - 2, |_, _| rng.gen_range(-v_range..v_range)),
    )
}

pub fn random_vec<R: Rng>(m: usize, rng: &mut R, r: f64) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.gen_range(-r..r))
}

/// Classical fixed-step RK4 for `y' = rhs(t, y)`.
pub fn rk4(rhs: impl Fn(f64, &[f64]) -> Vec<f64>, t0: f64, y0: &[f64], t1: f64, h: f64) -> Vec<f64> {
    let steps = ((t1 - t0).abs() / h).ceil() as usize;
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.to_vec();
    let mut t = t0;
    let axpy = |y: &[f64], k: &[f64], c: f64| y.iter().zip(k).map(|(a, b)| a + c * b).collect::<Vec<_>>();
    for _ in 0..steps {
        let k1 = rhs(t, &y);
        let k2 = rhs(t + h / 2.0, &axpy(&y, &k1, h / 2.0));
        let k3 = rhs(t + h / 2.0, &axpy(&y, &k2, h / 2.0));
        let k4 = rhs(t + h, &axpy(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    y
}

/// Christoffel symbols from the coordinate formula applied to central
/// differences of the metric matrix. Indexed `[a][b][c]` as in the library.
pub fn christoffel_fd(model: &Model, p: &Point64, h: f64) -> Vec<f64> {
    let n = model.n();
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|e| (model.metric_matrix(&p.shifted(e, h)) - model.metric_matrix(&p.shifted(e, -h))) / (2.0 * h))
        .collect();
    let gi = model.inverse_metric(p);
    let mut out = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut v = 0.0;
                for d in 0..n {
                    v += 0.5 * gi[(a, d)] * (dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)]);
                }
                out[(a * n + b) * n + c] = v;
            }
        }
    }
    out
}

/// Largest absolute entry.
pub fn amax(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}
