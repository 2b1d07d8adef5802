//! Model spacetimes `(R^2 x V, kappa dt^2 + dt ds + <dv, dv>)` with
//! `kappa(t, s, v) = f(t) |v|^2 + <A v, v>`.
//!
//! Coordinates are ordered `(t, s, x_1, ..., x_{n-2})`; [`T_IDX`] and
//! [`S_IDX`] name the first two slots and spatial index `i` lives at
//! `X0 + i`. The cross term `dt ds` is the symmetric product, so
//! `g_ts = g_st = 1/2`.

pub mod config;
pub mod eigen;
mod fourier;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use eigen::{sorted_symmetric_eigen, SortedEigen, CLUSTER_RTOL};
pub use fourier::FourierSeries;

use crate::error::{Error, Result};
use crate::hill::FundamentalPair;
use crate::scalar::Real;

pub const T_IDX: usize = 0;
pub const S_IDX: usize = 1;
pub const X0: usize = 2;

/// Validation regime for [`build_model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `n >= 5`, nonconstant `f`, `A != 0`: the essentially-parallel-Weyl family.
    Strict,
    /// `n >= 4`; constant `f` and `A = 0` allowed. Used for degenerate oracles.
    Relaxed,
}

struct ModelInner<T: Real> {
    n: usize,
    fourier: FourierSeries<T>,
    a: DMatrix<T>,
    eigen: SortedEigen<T>,
    mode: Mode,
    pairs: Vec<FundamentalPair<T>>,
}

/// A validated model spacetime. Cloning is cheap and clones share the
/// fundamental-solution caches.
#[derive(Clone)]
pub struct ModelSpec<T: Real> {
    inner: Arc<ModelInner<T>>,
}

impl<T: Real> fmt::Debug for ModelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("n", &self.inner.n)
            .field("mode", &self.inner.mode)
            .field("fourier", &self.inner.fourier)
            .field("eigenvalues", &self.inner.eigen.values.as_slice())
            .finish()
    }
}

/// Builds and validates a model.
pub fn build_model<T: Real>(n: usize, fourier: FourierSeries<T>, a_entries: DMatrix<T>, mode: Mode) -> Result<ModelSpec<T>> {
    let min = match mode {
        Mode::Strict => 5,
        Mode::Relaxed => 4,
    };
    if n < min {
        return Err(Error::DimensionTooSmall { n, min });
    }
    let m = n - 2;
    if a_entries.nrows() != m {
        return Err(Error::DimensionMismatch { expected: m, found: a_entries.nrows() });
    }
    if a_entries.ncols() != m {
        return Err(Error::DimensionMismatch { expected: m, found: a_entries.ncols() });
    }
    if a_entries.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidValue("non-finite entry in A".into()));
    }
    let scale = a_entries.amax().max(T::one());
    let asym = (&a_entries - a_entries.transpose()).amax();
    if asym > T::lit(1e-12) * scale {
        return Err(Error::NonSymmetric(asym.as_f64()));
    }
    let trace = a_entries.trace();
    if trace.abs() > T::lit(1e-12) * scale {
        return Err(Error::NonTraceless(trace.as_f64()));
    }
    if mode == Mode::Strict {
        if a_entries.amax() == T::zero() {
            return Err(Error::ZeroOperator);
        }
        if !fourier.is_nonconstant() {
            return Err(Error::ConstantF);
        }
    }
    let a = (&a_entries + a_entries.transpose()) * T::lit(0.5);
    let eigen = sorted_symmetric_eigen(&a);

    let lam_sum = eigen.values.sum();
    if lam_sum.abs() > T::lit(1e-10) * scale {
        return Err(Error::NonTraceless(lam_sum.as_f64()));
    }
    let orth = (eigen.vectors.transpose() * &eigen.vectors - DMatrix::identity(m, m)).amax();
    if orth > T::lit(1e-10) {
        return Err(Error::InvalidValue(format!("eigenvector matrix not orthogonal ({:e})", orth.as_f64())));
    }

    let pairs = eigen.values.iter().map(|&lam| FundamentalPair::new(lam, fourier.clone())).collect();
    Ok(ModelSpec { inner: Arc::new(ModelInner { n, fourier, a, eigen, mode, pairs }) })
}

/// Point `(t, s, v)` of the model manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T: Real> {
    pub t: T,
    pub s: T,
    pub v: DVector<T>,
}

impl<T: Real> Point<T> {
    pub fn new(t: T, s: T, v: DVector<T>) -> Self {
        Self { t, s, v }
    }

    pub fn origin(n: usize) -> Self {
        Self { t: T::zero(), s: T::zero(), v: DVector::zeros(n - 2) }
    }

    pub fn dim(&self) -> usize {
        self.v.len() + 2
    }

    /// Coordinate vector `(t, s, x_1, ...)`.
    pub fn coords(&self) -> DVector<T> {
        let mut c = DVector::zeros(self.dim());
        c[T_IDX] = self.t;
        c[S_IDX] = self.s;
        c.rows_mut(X0, self.v.len()).copy_from(&self.v);
        c
    }

    pub fn from_coords(c: &[T]) -> Self {
        Self { t: c[T_IDX], s: c[S_IDX], v: DVector::from_column_slice(&c[X0..]) }
    }

    /// Point displaced by `h` along coordinate `axis`.
    pub fn shifted(&self, axis: usize, h: T) -> Self {
        let mut p = self.clone();
        match axis {
            T_IDX => p.t += h,
            S_IDX => p.s += h,
            i => p.v[i - X0] += h,
        }
        p
    }
}

/// Tangent vector `dt d_t + ds d_s + dv . d_x` at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent<T: Real> {
    pub base: Point<T>,
    pub dt: T,
    pub ds: T,
    pub dv: DVector<T>,
}

impl<T: Real> Tangent<T> {
    pub fn new(base: Point<T>, dt: T, ds: T, dv: DVector<T>) -> Self {
        Self { base, dt, ds, dv }
    }

    pub fn zero(base: Point<T>) -> Self {
        let m = base.v.len();
        Self { base, dt: T::zero(), ds: T::zero(), dv: DVector::zeros(m) }
    }

    /// Coordinate basis vector `d_axis` at `base`.
    pub fn coordinate(base: Point<T>, axis: usize) -> Self {
        let mut c = DVector::zeros(base.dim());
        c[axis] = T::one();
        Self::from_components(base, c.as_slice())
    }

    pub fn components(&self) -> DVector<T> {
        let mut c = DVector::zeros(self.dv.len() + 2);
        c[T_IDX] = self.dt;
        c[S_IDX] = self.ds;
        c.rows_mut(X0, self.dv.len()).copy_from(&self.dv);
        c
    }

    pub fn from_components(base: Point<T>, c: &[T]) -> Self {
        Self { base, dt: c[T_IDX], ds: c[S_IDX], dv: DVector::from_column_slice(&c[X0..]) }
    }
}

/// Partial derivative selector for kappa: `d_t^t d_s^s d_{x_i}...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KappaPartial {
    pub t: u32,
    pub s: u32,
    pub x: Vec<usize>,
}

impl KappaPartial {
    pub fn value() -> Self {
        Self { t: 0, s: 0, x: vec![] }
    }
    pub fn dt() -> Self {
        Self { t: 1, s: 0, x: vec![] }
    }
    pub fn dt2() -> Self {
        Self { t: 2, s: 0, x: vec![] }
    }
    pub fn ds() -> Self {
        Self { t: 0, s: 1, x: vec![] }
    }
    pub fn di(i: usize) -> Self {
        Self { t: 0, s: 0, x: vec![i] }
    }
    pub fn dtdi(i: usize) -> Self {
        Self { t: 1, s: 0, x: vec![i] }
    }
    pub fn didj(i: usize, j: usize) -> Self {
        Self { t: 0, s: 0, x: vec![i, j] }
    }
    pub fn mixed(t: u32, x: Vec<usize>) -> Self {
        Self { t, s: 0, x }
    }
}

/// Nonzero Christoffel symbols at a point. Everything not listed vanishes:
///
/// * `Gamma^s_{it} = Gamma^s_{ti} = d_i kappa`
/// * `Gamma^s_{tt} = d_t kappa`
/// * `Gamma^i_{tt} = -1/2 d_i kappa`
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelTable<T: Real> {
    /// `d_i kappa`, length `n - 2`.
    pub grad: DVector<T>,
    /// `d_t kappa`.
    pub dt: T,
}

impl<T: Real> ChristoffelTable<T> {
    pub fn dim(&self) -> usize {
        self.grad.len() + 2
    }

    /// `Gamma^a_{bc}`.
    pub fn get(&self, a: usize, b: usize, c: usize) -> T {
        match (a, b, c) {
            (S_IDX, T_IDX, T_IDX) => self.dt,
            (S_IDX, T_IDX, j) | (S_IDX, j, T_IDX) if j >= X0 => self.grad[j - X0],
            (i, T_IDX, T_IDX) if i >= X0 => -T::lit(0.5) * self.grad[i - X0],
            _ => T::zero(),
        }
    }

    /// Dense `n^3` array indexed `[a][b][c]` as `a * n^2 + b * n + c`.
    pub fn to_dense(&self) -> Vec<T> {
        let n = self.dim();
        let mut out = vec![T::zero(); n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    out[(a * n + b) * n + c] = self.get(a, b, c);
                }
            }
        }
        out
    }

    /// `Gamma^k_{mu nu} x^mu y^nu` using the sparse structure.
    pub fn contract(&self, x: &[T], y: &[T], out: &mut [T]) {
        let m = self.grad.len();
        let (xt, yt) = (x[T_IDX], y[T_IDX]);
        let mut s = self.dt * xt * yt;
        for i in 0..m {
            s += self.grad[i] * (x[X0 + i] * yt + xt * y[X0 + i]);
        }
        out[T_IDX] = T::zero();
        out[S_IDX] = s;
        let half = T::lit(0.5) * xt * yt;
        for i in 0..m {
            out[X0 + i] = -half * self.grad[i];
        }
    }
}

impl<T: Real> ModelSpec<T> {
    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// `n - 2`, the dimension of `V`.
    pub fn fiber_dim(&self) -> usize {
        self.inner.n - 2
    }

    pub fn fourier(&self) -> &FourierSeries<T> {
        &self.inner.fourier
    }

    pub fn period(&self) -> T {
        self.inner.fourier.period()
    }

    pub fn mode(&self) -> Mode {
        self.inner.mode
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.inner.a
    }

    pub fn eigen(&self) -> &SortedEigen<T> {
        &self.inner.eigen
    }

    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.inner.eigen.values
    }

    pub fn eigenvectors(&self) -> &DMatrix<T> {
        &self.inner.eigen.vectors
    }

    pub fn f(&self, t: T) -> T {
        self.inner.fourier.value(t)
    }

    pub(crate) fn pair(&self, i: usize) -> &FundamentalPair<T> {
        &self.inner.pairs[i]
    }

    /// True if both handles refer to the same model instance.
    pub fn same_as(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    /// `f(t) I + A`.
    pub fn k_matrix(&self, t: T) -> DMatrix<T> {
        let m = self.fiber_dim();
        &self.inner.a + DMatrix::identity(m, m) * self.f(t)
    }

    fn check_point(&self, p: &Point<T>) {
        assert_eq!(p.v.len(), self.fiber_dim(), "point has wrong fiber dimension");
    }

    /// Exact partial derivative of kappa.
    pub fn eval_kappa(&self, point: &Point<T>, d: &KappaPartial) -> Result<T> {
        let m = self.fiber_dim();
        if point.v.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: point.v.len() });
        }
        if let Some(&bad) = d.x.iter().find(|&&i| i >= m) {
            return Err(Error::InvalidSelector(format!("spatial index {bad} out of range 0..{m}")));
        }
        if d.s > 0 {
            return Ok(T::zero());
        }
        let fk = self.inner.fourier.derivative(point.t, d.t);
        let v = &point.v;
        let a = &self.inner.a;
        let with_a = d.t == 0;
        Ok(match d.x.as_slice() {
            [] => {
                let mut k = fk * v.norm_squared();
                if with_a {
                    k += v.dot(&(a * v));
                }
                k
            }
            [i] => {
                let mut g = fk * v[*i];
                if with_a {
                    g += a.row(*i).transpose().dot(v);
                }
                T::lit(2.0) * g
            }
            [i, j] => {
                let mut h = if i == j { fk } else { T::zero() };
                if with_a {
                    h += a[(*i, *j)];
                }
                T::lit(2.0) * h
            }
            _ => T::zero(),
        })
    }

    pub fn kappa(&self, point: &Point<T>) -> T {
        self.check_point(point);
        let v = &point.v;
        self.f(point.t) * v.norm_squared() + v.dot(&(&self.inner.a * v))
    }

    /// `grad_x kappa = 2 (f(t) v + A v)`.
    pub fn grad_kappa(&self, point: &Point<T>) -> DVector<T> {
        self.check_point(point);
        (&point.v * self.f(point.t) + &self.inner.a * &point.v) * T::lit(2.0)
    }

    /// Metric components at a point.
    pub fn metric_matrix(&self, point: &Point<T>) -> DMatrix<T> {
        let n = self.n();
        let mut g = DMatrix::zeros(n, n);
        g[(T_IDX, T_IDX)] = self.kappa(point);
        g[(T_IDX, S_IDX)] = T::lit(0.5);
        g[(S_IDX, T_IDX)] = T::lit(0.5);
        for i in X0..n {
            g[(i, i)] = T::one();
        }
        g
    }

    /// Inverse metric: `g^{ts} = 2`, `g^{ss} = -4 kappa`, `g^{ij} = delta`.
    pub fn inverse_metric(&self, point: &Point<T>) -> DMatrix<T> {
        let n = self.n();
        let mut gi = DMatrix::zeros(n, n);
        gi[(T_IDX, S_IDX)] = T::lit(2.0);
        gi[(S_IDX, T_IDX)] = T::lit(2.0);
        gi[(S_IDX, S_IDX)] = -T::lit(4.0) * self.kappa(point);
        for i in X0..n {
            gi[(i, i)] = T::one();
        }
        gi
    }

    /// `g(X, Y)`; both vectors must share the base point.
    pub fn metric_at(&self, x: &Tangent<T>, y: &Tangent<T>) -> Result<T> {
        if x.base != y.base {
            return Err(Error::BasePointMismatch);
        }
        let k = self.kappa(&x.base);
        let half = T::lit(0.5);
        Ok(k * (x.dt * y.dt) + half * (x.dt * y.ds + x.ds * y.dt) + x.dv.dot(&y.dv))
    }

    /// Metric applied to raw component vectors at `point`.
    pub fn metric_components(&self, point: &Point<T>, x: &[T], y: &[T]) -> T {
        let k = self.kappa(point);
        let mut acc = k * (x[T_IDX] * y[T_IDX]) + T::lit(0.5) * (x[T_IDX] * y[S_IDX] + x[S_IDX] * y[T_IDX]);
        for i in X0..x.len() {
            acc += x[i] * y[i];
        }
        acc
    }

    pub fn christoffel_at(&self, point: &Point<T>) -> ChristoffelTable<T> {
        let fd = self.inner.fourier.derivative(point.t, 1);
        ChristoffelTable { grad: self.grad_kappa(point), dt: fd * point.v.norm_squared() }
    }

    /// `d_e Gamma` for coordinate direction `e`, as a table of the same shape:
    /// the symbols are linear in the first derivatives of kappa.
    pub fn christoffel_derivative(&self, point: &Point<T>, e: usize) -> ChristoffelTable<T> {
        self.christoffel_jet(point, &[e])
    }

    /// Second derivative `d_e d_f Gamma`.
    pub fn christoffel_second_derivative(&self, point: &Point<T>, e: usize, f: usize) -> ChristoffelTable<T> {
        self.christoffel_jet(point, &[e, f])
    }

    fn christoffel_jet(&self, point: &Point<T>, dirs: &[usize]) -> ChristoffelTable<T> {
        let m = self.fiber_dim();
        if dirs.contains(&S_IDX) {
            return ChristoffelTable { grad: DVector::zeros(m), dt: T::zero() };
        }
        let t_order = dirs.iter().filter(|&&d| d == T_IDX).count() as u32;
        let xs: Vec<usize> = dirs.iter().filter(|&&d| d >= X0).map(|&d| d - X0).collect();
        let dt = self.eval_kappa(point, &KappaPartial::mixed(t_order + 1, xs.clone())).unwrap();
        let grad = DVector::from_fn(m, |i, _| {
            let mut x = xs.clone();
            x.push(i);
            self.eval_kappa(point, &KappaPartial::mixed(t_order, x)).unwrap()
        });
        ChristoffelTable { grad, dt }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(xs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(xs))
    }

    fn cos_profile() -> FourierSeries<f64> {
        FourierSeries::new(1.0, 0.0, vec![(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn valid_strict_model() {
        let m = build_model(5, cos_profile(), diag(&[1.0, 1.0, -2.0]), Mode::Strict).unwrap();
        assert_eq!(m.eigenvalues().as_slice(), &[1.0, 1.0, -2.0]);
        assert_eq!(m.eigen().multiplicities, vec![2, 1]);
    }

    #[test]
    fn normalized_operator_keeps_its_spectrum_shape() {
        let norm = 6f64.sqrt();
        let m = build_model(5, cos_profile(), diag(&[1.0, 1.0, -2.0]) / norm, Mode::Strict).unwrap();
        let ev = m.eigenvalues();
        assert_relative_eq!(ev[0] * norm, 1.0, epsilon = 1e-12);
        assert_relative_eq!(ev[2] * norm, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn validation_errors() {
        let f = cos_profile();
        assert!(matches!(build_model(5, f.clone(), diag(&[1.0, 1.0, 1.0]), Mode::Strict), Err(Error::NonTraceless(_))));
        let zero = FourierSeries::constant(1.0, 0.0).unwrap();
        assert_eq!(build_model(5, zero.clone(), diag(&[1.0, 1.0, -2.0]), Mode::Strict).unwrap_err(), Error::ConstantF);
        assert_eq!(build_model(5, f.clone(), diag(&[0.0, 0.0, 0.0]), Mode::Strict).unwrap_err(), Error::ZeroOperator);
        assert_eq!(
            build_model(4, f.clone(), diag(&[1.0, -1.0]), Mode::Strict).unwrap_err(),
            Error::DimensionTooSmall { n: 4, min: 5 }
        );
        assert_eq!(
            build_model(3, f.clone(), diag(&[0.0]), Mode::Relaxed).unwrap_err(),
            Error::DimensionTooSmall { n: 3, min: 4 }
        );
        let mut ns = diag(&[1.0, -1.0, 0.0]);
        ns[(0, 1)] = 0.5;
        assert!(matches!(build_model(5, f.clone(), ns, Mode::Strict), Err(Error::NonSymmetric(_))));
        assert!(matches!(build_model(5, f, diag(&[1.0, -1.0]), Mode::Strict), Err(Error::DimensionMismatch { .. })));
        // Relaxed allows the degenerate cases.
        assert!(build_model(4, zero, diag(&[0.0, 0.0]), Mode::Relaxed).is_ok());
    }

    fn planar() -> ModelSpec<f64> {
        build_model(4, cos_profile(), diag(&[1.0, -1.0]), Mode::Relaxed).unwrap()
    }

    #[test]
    fn kappa_examples() {
        let m = planar();
        let origin = Point::origin(4);
        assert_eq!(m.eval_kappa(&origin, &KappaPartial::value()).unwrap(), 0.0);
        for i in 0..2 {
            assert_eq!(m.eval_kappa(&origin, &KappaPartial::di(i)).unwrap(), 0.0);
        }
        let p = Point::new(0.0, 3.0, DVector::from_vec(vec![1.0, 0.0]));
        assert_relative_eq!(m.eval_kappa(&p, &KappaPartial::value()).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(m.eval_kappa(&p, &KappaPartial::ds()).unwrap(), 0.0);
        assert!(matches!(m.eval_kappa(&p, &KappaPartial::di(2)), Err(Error::InvalidSelector(_))));
    }

    #[test]
    fn metric_examples() {
        let m = planar();
        let p = Point::new(0.3, 1.0, DVector::from_vec(vec![0.4, -0.2]));
        let e = |a| Tangent::coordinate(p.clone(), a);
        assert_eq!(m.metric_at(&e(S_IDX), &e(S_IDX)).unwrap(), 0.0);
        assert_eq!(m.metric_at(&e(T_IDX), &e(S_IDX)).unwrap(), 0.5);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(m.metric_at(&e(X0 + i), &e(X0 + j)).unwrap(), expect);
            }
        }
        let other = Tangent::coordinate(Point::origin(4), T_IDX);
        assert_eq!(m.metric_at(&e(T_IDX), &other).unwrap_err(), Error::BasePointMismatch);
        let gi = m.inverse_metric(&p);
        assert!((m.metric_matrix(&p) * gi - DMatrix::identity(4, 4)).amax() < 1e-15);
    }

    #[test]
    fn christoffel_vanish_at_zero_fiber() {
        let m = planar();
        let table = m.christoffel_at(&Point::new(0.7, -2.0, DVector::zeros(2)));
        assert!(table.to_dense().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn christoffel_listed_entries() {
        let m = planar();
        let p = Point::new(0.2, 0.0, DVector::from_vec(vec![0.5, 1.5]));
        let tab = m.christoffel_at(&p);
        let f = m.f(0.2);
        let av = m.a() * &p.v;
        for i in 0..2 {
            let expect = 2.0 * (f * p.v[i] + av[i]);
            assert_eq!(tab.get(S_IDX, X0 + i, T_IDX), expect);
            assert_eq!(tab.get(S_IDX, T_IDX, X0 + i), expect);
            assert_eq!(tab.get(X0 + i, T_IDX, T_IDX), -0.5 * expect);
        }
    }

    #[test]
    fn f32_instantiation() {
        let f = FourierSeries::<f32>::new(1.0, 0.0, vec![(1.0, 0.0)]).unwrap();
        let a = DMatrix::<f32>::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -2.0]));
        let m = build_model(5, f, a, Mode::Strict).unwrap();
        let p = Point::new(0.0f32, 0.0, DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert!((m.kappa(&p) - 2.0).abs() < 1e-6);
    }
}
