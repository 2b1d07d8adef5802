//! Solution space of the Hill system `u'' = (f(t) + A) u`.
//!
//! In the eigenbasis of `A` the system decouples into scalar equations
//! `x'' = (f + lambda) x`, each solved once by a [`FundamentalPair`]. A
//! [`HillSolution`] is stored as its initial data `(u(0), u'(0))` and evaluated
//! by superposition.

use std::ops::ControlFlow;
use std::sync::RwLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{FourierSeries, ModelSpec};
use crate::ode::{hermite5, locate, Dopri5};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
struct Knot<T> {
    t: T,
    y: [T; 4],
    dy: [T; 4],
    ddy: [T; 4],
}

#[derive(Debug)]
struct Table<T> {
    knots: Vec<Knot<T>>,
}

/// Fundamental solutions `c, s` of `x'' = (f + lambda) x` with
/// `c(0) = 1, c'(0) = 0, s(0) = 0, s'(0) = 1`.
///
/// Values are tabulated on the accepted steps of an adaptive integrator and
/// interpolated with quintic Hermite polynomials whose derivative data comes
/// straight from the equation. The table grows lazily in both directions;
/// growth takes a write lock, evaluation a read lock.
#[derive(Debug)]
pub struct FundamentalPair<T: Real> {
    lambda: T,
    fourier: FourierSeries<T>,
    table: RwLock<Table<T>>,
}

impl<T: Real> Clone for FundamentalPair<T> {
    fn clone(&self) -> Self {
        let knots = self.table.read().unwrap().knots.clone();
        Self { lambda: self.lambda, fourier: self.fourier.clone(), table: RwLock::new(Table { knots }) }
    }
}

/// Values `(c, c', s, s')` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairValue<T> {
    pub c: T,
    pub dc: T,
    pub s: T,
    pub ds: T,
}

impl<T: Real> PairValue<T> {
    pub fn wronskian(&self) -> T {
        self.c * self.ds - self.dc * self.s
    }
}

impl<T: Real> FundamentalPair<T> {
    pub fn new(lambda: T, fourier: FourierSeries<T>) -> Self {
        let pair = Self { lambda, fourier, table: RwLock::new(Table { knots: Vec::new() }) };
        let k0 = pair.knot(T::zero(), [T::one(), T::zero(), T::zero(), T::one()]);
        pair.table.write().unwrap().knots.push(k0);
        pair
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    fn knot(&self, t: T, y: [T; 4]) -> Knot<T> {
        let q = self.fourier.value(t) + self.lambda;
        let dq = self.fourier.derivative(t, 1);
        Knot {
            t,
            y,
            dy: [y[1], q * y[0], y[3], q * y[2]],
            ddy: [q * y[0], dq * y[0] + q * y[1], q * y[2], dq * y[2] + q * y[3]],
        }
    }

    fn integrator(&self) -> Dopri5<T> {
        Dopri5::new(T::lit(1e-10), T::lit(1e-10)).with_h_max(self.fourier.period() / T::lit(16.0))
    }

    /// Grows the table one period at a time until it covers `t`. Chunks start
    /// at multiples of the period with a fresh integrator, so the knots do not
    /// depend on the order in which times are requested.
    fn extend_to(&self, t: T) -> Result<()> {
        let mut table = self.table.write().unwrap();
        let p = self.fourier.period();
        let lambda = self.lambda;
        let fourier = &self.fourier;
        let rhs = |tt: T, y: &[T], dy: &mut [T]| {
            let q = fourier.value(tt) + lambda;
            dy[0] = y[1];
            dy[1] = q * y[0];
            dy[2] = y[3];
            dy[3] = q * y[2];
        };
        loop {
            let (lo, hi) = (table.knots[0], *table.knots.last().unwrap());
            if t > hi.t {
                let mut fresh = Vec::new();
                self.integrator().integrate(rhs, hi.t, &hi.y, hi.t + p, |tt, y, _| {
                    fresh.push(self.knot(tt, [y[0], y[1], y[2], y[3]]));
                    ControlFlow::Continue(())
                })?;
                table.knots.extend(fresh);
            } else if t < lo.t {
                let mut fresh = Vec::new();
                self.integrator().integrate(rhs, lo.t, &lo.y, lo.t - p, |tt, y, _| {
                    fresh.push(self.knot(tt, [y[0], y[1], y[2], y[3]]));
                    ControlFlow::Continue(())
                })?;
                fresh.reverse();
                fresh.append(&mut table.knots);
                table.knots = fresh;
            } else {
                return Ok(());
            }
        }
    }

    fn covers(&self, t: T) -> bool {
        let table = self.table.read().unwrap();
        table.knots.len() >= 2 && table.knots[0].t <= t && t <= table.knots.last().unwrap().t
    }

    /// `(c, c', s, s')` at `t`.
    pub fn try_eval(&self, t: T) -> Result<PairValue<T>> {
        if !t.is_finite() {
            return Err(Error::InvalidValue("non-finite time".into()));
        }
        if t == T::zero() {
            return Ok(PairValue { c: T::one(), dc: T::zero(), s: T::zero(), ds: T::one() });
        }
        if !self.covers(t) {
            self.extend_to(t)?;
        }
        let table = self.table.read().unwrap();
        let ts: Vec<T> = table.knots.iter().map(|k| k.t).collect();
        let i = locate(&ts, t);
        let (a, b) = (&table.knots[i], &table.knots[i + 1]);
        let comp = |j: usize| hermite5(a.t, b.t, a.y[j], a.dy[j], a.ddy[j], b.y[j], b.dy[j], b.ddy[j], t);
        Ok(PairValue { c: comp(0), dc: comp(1), s: comp(2), ds: comp(3) })
    }

    /// Like [`try_eval`](Self::try_eval).
    ///
    /// # Panics
    /// If the table cannot be extended to `t` (overflow of the solutions).
    pub fn eval(&self, t: T) -> PairValue<T> {
        self.try_eval(t).unwrap_or_else(|e| panic!("fundamental pair at t = {}: {e}", t.as_f64()))
    }

    /// Largest `|W - 1|` over every tabulated knot.
    pub fn max_wronskian_defect(&self) -> T {
        let table = self.table.read().unwrap();
        table.knots.iter().fold(T::zero(), |m, k| m.max((k.y[0] * k.y[3] - k.y[1] * k.y[2] - T::one()).abs()))
    }

    /// Currently tabulated time span.
    pub fn span(&self) -> (T, T) {
        let table = self.table.read().unwrap();
        (table.knots[0].t, table.knots.last().unwrap().t)
    }
}

/// `(c, c', s, s')` for `x'' = (f + lambda) x` at time `t`.
///
/// Reuses the model's cached pair when `lambda` is one of its eigenvalues.
pub fn fundamental_pair<T: Real>(model: &ModelSpec<T>, lambda: T, t: T) -> Result<PairValue<T>> {
    if let Some(i) = model.eigenvalues().iter().position(|&l| l == lambda) {
        return model.pair(i).try_eval(t);
    }
    FundamentalPair::new(lambda, model.fourier().clone()).try_eval(t)
}

/// Element of the solution space, stored as initial data at `t = 0`.
#[derive(Debug, Clone)]
pub struct HillSolution<T: Real> {
    model: ModelSpec<T>,
    pub u0: DVector<T>,
    pub w0: DVector<T>,
}

impl<T: Real> HillSolution<T> {
    pub fn new(model: &ModelSpec<T>, u0: DVector<T>, w0: DVector<T>) -> Result<Self> {
        let m = model.fiber_dim();
        for v in [&u0, &w0] {
            if v.len() != m {
                return Err(Error::DimensionMismatch { expected: m, found: v.len() });
            }
        }
        Ok(Self { model: model.clone(), u0, w0 })
    }

    pub fn zero(model: &ModelSpec<T>) -> Self {
        let m = model.fiber_dim();
        Self { model: model.clone(), u0: DVector::zeros(m), w0: DVector::zeros(m) }
    }

    /// Solution with prescribed data `(u(t0), u'(t0)) = (x, xd)`.
    pub fn with_data_at(model: &ModelSpec<T>, t0: T, x: &DVector<T>, xd: &DVector<T>) -> Result<Self> {
        let m = model.fiber_dim();
        if x.len() != m || xd.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: x.len().max(xd.len()) });
        }
        let e = model.eigenvectors();
        let (xe, xde) = (e.transpose() * x, e.transpose() * xd);
        let mut a = DVector::zeros(m);
        let mut b = DVector::zeros(m);
        for i in 0..m {
            // Inverse of [[c, s], [c', s']], whose determinant is 1.
            let pv = model.pair(i).try_eval(t0)?;
            a[i] = pv.ds * xe[i] - pv.s * xde[i];
            b[i] = -pv.dc * xe[i] + pv.c * xde[i];
        }
        Ok(Self { model: model.clone(), u0: e * a, w0: e * b })
    }

    pub fn model(&self) -> &ModelSpec<T> {
        &self.model
    }

    /// `(u(t), u'(t))`.
    pub fn try_eval(&self, t: T) -> Result<(DVector<T>, DVector<T>)> {
        if t == T::zero() {
            return Ok((self.u0.clone(), self.w0.clone()));
        }
        let e = self.model.eigenvectors();
        let a = e.transpose() * &self.u0;
        let b = e.transpose() * &self.w0;
        let m = a.len();
        let mut x = DVector::zeros(m);
        let mut xd = DVector::zeros(m);
        for i in 0..m {
            let pv = self.model.pair(i).try_eval(t)?;
            x[i] = a[i] * pv.c + b[i] * pv.s;
            xd[i] = a[i] * pv.dc + b[i] * pv.ds;
        }
        Ok((e * x, e * xd))
    }

    /// # Panics
    /// If the fundamental solutions overflow before reaching `t`.
    pub fn eval(&self, t: T) -> (DVector<T>, DVector<T>) {
        self.try_eval(t).unwrap_or_else(|e| panic!("Hill solution at t = {}: {e}", t.as_f64()))
    }

    /// `u''(t) = (f(t) + A) u(t)`.
    pub fn second_derivative(&self, t: T) -> DVector<T> {
        let (u, _) = self.eval(t);
        self.model.k_matrix(t) * u
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.model.same_as(&other.model) {
            Ok(())
        } else {
            Err(Error::ModelMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { model: self.model.clone(), u0: &self.u0 + &other.u0, w0: &self.w0 + &other.w0 })
    }

    pub fn scale(&self, c: T) -> Self {
        Self { model: self.model.clone(), u0: &self.u0 * c, w0: &self.w0 * c }
    }

    pub fn neg(&self) -> Self {
        self.scale(-T::one())
    }

    /// Initial data stacked as `(u0, w0)`.
    pub fn initial_data(&self) -> DVector<T> {
        let m = self.u0.len();
        let mut d = DVector::zeros(2 * m);
        d.rows_mut(0, m).copy_from(&self.u0);
        d.rows_mut(m, m).copy_from(&self.w0);
        d
    }

    pub fn from_initial_data(model: &ModelSpec<T>, data: &DVector<T>) -> Result<Self> {
        let m = model.fiber_dim();
        if data.len() != 2 * m {
            return Err(Error::DimensionMismatch { expected: 2 * m, found: data.len() });
        }
        Self::new(model, data.rows(0, m).into_owned(), data.rows(m, m).into_owned())
    }
}

/// `Omega(u1, u2) = <u1', u2> - <u1, u2'>` evaluated at time `t`.
pub fn omega<T: Real>(u1: &HillSolution<T>, u2: &HillSolution<T>, t: T) -> Result<T> {
    u1.check_same(u2)?;
    let (x1, d1) = u1.try_eval(t)?;
    let (x2, d2) = u2.try_eval(t)?;
    Ok(d1.dot(&x2) - x1.dot(&d2))
}

/// `Omega` from initial data; exact up to rounding.
pub fn omega_initial<T: Real>(u1: &HillSolution<T>, u2: &HillSolution<T>) -> Result<T> {
    u1.check_same(u2)?;
    Ok(u1.w0.dot(&u2.u0) - u1.u0.dot(&u2.w0))
}

/// `Omega` on stacked initial-data vectors `(u0, w0)`.
pub fn omega_data<T: Real>(a: &DVector<T>, b: &DVector<T>) -> T {
    let m = a.len() / 2;
    a.rows(m, m).dot(&b.rows(0, m)) - a.rows(0, m).dot(&b.rows(m, m))
}

/// `T^k u`, the solution `t -> u(t - k p)`.
pub fn shift<T: Real>(u: &HillSolution<T>, k: i64) -> Result<HillSolution<T>> {
    if k == 0 {
        return Ok(u.clone());
    }
    let t = -T::lit(k as f64) * u.model.period();
    let (x, xd) = u.try_eval(t)?;
    HillSolution::new(&u.model, x, xd)
}

/// `(xi_1..xi_m, xi*_1..xi*_m)` with `xi_i = (e_i, 0)` and `xi*_i = (0, e_i)`.
pub fn canonical_basis<T: Real>(model: &ModelSpec<T>) -> (Vec<HillSolution<T>>, Vec<HillSolution<T>>) {
    let m = model.fiber_dim();
    let unit = |i: usize| {
        let mut e = DVector::zeros(m);
        e[i] = T::one();
        e
    };
    let xi = (0..m).map(|i| HillSolution { model: model.clone(), u0: unit(i), w0: DVector::zeros(m) }).collect();
    let xs = (0..m).map(|i| HillSolution { model: model.clone(), u0: DVector::zeros(m), w0: unit(i) }).collect();
    (xi, xs)
}

/// Fundamental matrix at time `t`: maps `(u(0), u'(0))` to `(u(t), u'(t))`.
pub fn propagator<T: Real>(model: &ModelSpec<T>, t: T) -> Result<DMatrix<T>> {
    let m = model.fiber_dim();
    let e = model.eigenvectors();
    let mut blocks = [DVector::zeros(m), DVector::zeros(m), DVector::zeros(m), DVector::zeros(m)];
    for i in 0..m {
        let pv = model.pair(i).try_eval(t)?;
        blocks[0][i] = pv.c;
        blocks[1][i] = pv.s;
        blocks[2][i] = pv.dc;
        blocks[3][i] = pv.ds;
    }
    let conj = |d: &DVector<T>| e * DMatrix::from_diagonal(d) * e.transpose();
    let mut out = DMatrix::zeros(2 * m, 2 * m);
    out.view_mut((0, 0), (m, m)).copy_from(&conj(&blocks[0]));
    out.view_mut((0, m), (m, m)).copy_from(&conj(&blocks[1]));
    out.view_mut((m, 0), (m, m)).copy_from(&conj(&blocks[2]));
    out.view_mut((m, m), (m, m)).copy_from(&conj(&blocks[3]));
    Ok(out)
}

/// Period map `(u0, w0) -> (u(p), u'(p))`.
pub fn monodromy<T: Real>(model: &ModelSpec<T>) -> Result<DMatrix<T>> {
    propagator(model, model.period())
}

/// Direction in which a Riccati solution left the finite region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUp<T> {
    pub t_star: T,
    pub side: Side,
}

/// Solution of `B' = f I + A - B^2` through `B(0) = B0`.
#[derive(Debug, Clone)]
pub struct RiccatiField<T: Real> {
    pub b0: DMatrix<T>,
    pub t_min: T,
    pub t_max: T,
    /// First detected blow-up; the path is truncated there.
    pub blowup: Option<BlowUp<T>>,
    ts: Vec<T>,
    bs: Vec<DMatrix<T>>,
    dbs: Vec<DMatrix<T>>,
    ddbs: Vec<DMatrix<T>>,
}

/// Norm beyond which a Riccati path counts as blown up.
pub const RICCATI_BLOWUP_NORM: f64 = 1e8;

impl<T: Real> RiccatiField<T> {
    /// `B(t)` for `t` in `[t_min, t_max]`.
    pub fn eval(&self, t: T) -> Option<DMatrix<T>> {
        if t < self.t_min || t > self.t_max || self.ts.len() < 2 {
            return if self.ts.len() == 1 && t == self.ts[0] { Some(self.bs[0].clone()) } else { None };
        }
        let i = locate(&self.ts, t);
        let (ta, tb) = (self.ts[i], self.ts[i + 1]);
        let (ba, bb) = (&self.bs[i], &self.bs[i + 1]);
        let (da, db) = (&self.dbs[i], &self.dbs[i + 1]);
        let (dda, ddb) = (&self.ddbs[i], &self.ddbs[i + 1]);
        Some(DMatrix::from_fn(ba.nrows(), ba.ncols(), |r, c| {
            hermite5(ta, tb, ba[(r, c)], da[(r, c)], dda[(r, c)], bb[(r, c)], db[(r, c)], ddb[(r, c)], t)
        }))
    }

    /// Accepted integration times.
    pub fn knots(&self) -> &[T] {
        &self.ts
    }

    /// Largest `|B - B^T|` over the tabulated path.
    pub fn max_asymmetry(&self) -> T {
        self.bs.iter().fold(T::zero(), |m, b| m.max((b - b.transpose()).amax()))
    }

    /// Errors with [`Error::BlowUpDetected`] if the path did not cover the
    /// requested span.
    pub fn ensure_complete(&self) -> Result<()> {
        match self.blowup {
            Some(b) => Err(Error::BlowUpDetected { t_star: b.t_star.as_f64() }),
            None => Ok(()),
        }
    }
}

/// Integrates the matrix Riccati equation over `span = (t_lo, t_hi)`, which
/// must contain `0`. The path stops early once `|B| > 1e8`; the pole is then
/// estimated from the dominant eigenvalue `beta` as `t* = t - 1/beta`.
pub fn riccati_solve<T: Real>(model: &ModelSpec<T>, b0: &DMatrix<T>, span: (T, T)) -> Result<RiccatiField<T>> {
    let m = model.fiber_dim();
    if b0.nrows() != m || b0.ncols() != m {
        return Err(Error::DimensionMismatch { expected: m, found: b0.nrows() });
    }
    let asym = (b0 - b0.transpose()).amax();
    if asym > T::lit(1e-10) * b0.amax().max(T::one()) {
        return Err(Error::NonSymmetric(asym.as_f64()));
    }
    let (t_lo, t_hi) = span;
    if !(t_lo <= T::zero() && T::zero() <= t_hi) {
        return Err(Error::InvalidValue("Riccati span must contain t = 0".into()));
    }
    let kmat = |t: T| model.k_matrix(t);
    let deriv = |t: T, b: &DMatrix<T>| kmat(t) - b * b;
    let second = |t: T, b: &DMatrix<T>, db: &DMatrix<T>| {
        DMatrix::identity(m, m) * model.fourier().derivative(t, 1) - db * b - b * db
    };
    let rhs = |t: T, y: &[T], dy: &mut [T]| {
        let b = DMatrix::from_column_slice(m, m, y);
        dy.copy_from_slice(deriv(t, &b).as_slice());
    };
    let limit = T::lit(RICCATI_BLOWUP_NORM);
    let ig = Dopri5::new(T::lit(1e-10), T::lit(1e-10)).with_h_max(model.period() / T::lit(16.0));

    let run = |t_end: T| -> Result<(Vec<T>, Vec<DMatrix<T>>, Option<T>)> {
        let mut ts = Vec::new();
        let mut bs = Vec::new();
        let mut blow = None;
        ig.integrate(rhs, T::zero(), b0.as_slice(), t_end, |t, y, _| {
            let b = DMatrix::from_column_slice(m, m, y);
            let big = b.norm() > limit;
            if big {
                let sym = (&b + b.transpose()) * T::lit(0.5);
                let ev = sym.symmetric_eigenvalues();
                let beta = ev.iter().fold(T::zero(), |acc, &x| if x.abs() > acc.abs() { x } else { acc });
                blow = Some(t - T::one() / beta);
            }
            ts.push(t);
            bs.push(b);
            if big {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        Ok((ts, bs, blow))
    };

    let (fts, fbs, fblow) = run(t_hi)?;
    let (bts, bbs, bblow) = run(t_lo)?;
    let mut ts: Vec<T> = bts.into_iter().rev().collect();
    let mut bs: Vec<DMatrix<T>> = bbs.into_iter().rev().collect();
    ts.push(T::zero());
    bs.push(b0.clone());
    ts.extend(fts);
    bs.extend(fbs);
    let dbs: Vec<_> = ts.iter().zip(&bs).map(|(&t, b)| deriv(t, b)).collect();
    let ddbs: Vec<_> = ts.iter().zip(bs.iter().zip(&dbs)).map(|(&t, (b, db))| second(t, b, db)).collect();

    // Prefer the pole closest to the origin when both sides blow up.
    let blowup = match (fblow, bblow) {
        (Some(f), Some(b)) if b.abs() < f.abs() => Some(BlowUp { t_star: b, side: Side::Backward }),
        (Some(f), _) => Some(BlowUp { t_star: f, side: Side::Forward }),
        (None, Some(b)) => Some(BlowUp { t_star: b, side: Side::Backward }),
        (None, None) => None,
    };
    Ok(RiccatiField {
        b0: b0.clone(),
        t_min: ts[0],
        t_max: *ts.last().unwrap(),
        blowup,
        ts,
        bs,
        dbs,
        ddbs,
    })
}

/// Basis `u_j = (e_j, B(0) e_j)` of the Lagrangian subspace defined by `B`.
pub fn lagrangian_subspace<T: Real>(model: &ModelSpec<T>, field: &RiccatiField<T>) -> Result<Vec<HillSolution<T>>> {
    let m = model.fiber_dim();
    if field.b0.nrows() != m {
        return Err(Error::DimensionMismatch { expected: m, found: field.b0.nrows() });
    }
    Ok((0..m)
        .map(|j| {
            let mut e = DVector::zeros(m);
            e[j] = T::one();
            let w = &field.b0 * &e;
            HillSolution { model: model.clone(), u0: e, w0: w }
        })
        .collect())
}
