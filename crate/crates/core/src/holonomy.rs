//! Parallel transport, transport matrices of deck generators, and sampled
//! holonomy of contractible loops.
//!
//! Transport matrices are written in the frame `(S, E_1, .., E_{n-2}, T)` with
//! `S = d_s`, `E_i = d_i` and `T = 2 (d_t - kappa d_s)`, whose Gram matrix is
//! `g(S, T) = 1`, `g(E_i, E_j) = delta_ij`, all other pairings zero.

use std::ops::ControlFlow;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{g_act, g_act_jacobian, g_inverse, GroupElement};
use crate::model::{ModelSpec, Point, S_IDX, T_IDX, X0};
use crate::ode::Dopri5;
use crate::scalar::Real;

/// Polyline through a sequence of points; each segment is a straight
/// coordinate line.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSpec<T: Real> {
    pub vertices: Vec<Point<T>>,
}

impl<T: Real> CurveSpec<T> {
    pub fn constant(p: Point<T>) -> Self {
        Self { vertices: vec![p] }
    }

    pub fn segment(a: Point<T>, b: Point<T>) -> Self {
        Self { vertices: vec![a, b] }
    }

    pub fn polyline(vertices: Vec<Point<T>>) -> Self {
        assert!(!vertices.is_empty(), "a curve needs at least one point");
        Self { vertices }
    }

    pub fn start(&self) -> &Point<T> {
        &self.vertices[0]
    }

    pub fn end(&self) -> &Point<T> {
        self.vertices.last().unwrap()
    }

    /// Point at `tau` in `[0, 1]`; segments share the parameter range evenly.
    pub fn at(&self, tau: T) -> Point<T> {
        let segs = self.vertices.len() - 1;
        if segs == 0 {
            return self.vertices[0].clone();
        }
        let scaled = tau.max(T::zero()).min(T::one()) * T::from_usize(segs).unwrap();
        let i = scaled.floor().to_usize().unwrap_or(0).min(segs - 1);
        let local = scaled - T::from_usize(i).unwrap();
        let (a, b) = (self.vertices[i].coords(), self.vertices[i + 1].coords());
        Point::from_coords((&a + (b - &a) * local).as_slice())
    }

    /// The curve traversed backwards.
    pub fn reversed(&self) -> Self {
        Self { vertices: self.vertices.iter().rev().cloned().collect() }
    }
}

fn transport_segment<T: Real>(model: &ModelSpec<T>, a: &Point<T>, b: &Point<T>, frame: &DMatrix<T>, tol: T) -> Result<DMatrix<T>> {
    let n = model.n();
    let ca = a.coords();
    let vel = b.coords() - &ca;
    if vel.amax() == T::zero() {
        return Ok(frame.clone());
    }
    let rhs = |sigma: T, y: &[T], dy: &mut [T]| {
        let p = Point::from_coords((&ca + &vel * sigma).as_slice());
        let gam = model.christoffel_at(&p);
        let mut out = vec![T::zero(); n];
        for col in 0..n {
            let yc = &y[col * n..(col + 1) * n];
            gam.contract(vel.as_slice(), yc, &mut out);
            for k in 0..n {
                dy[col * n + k] = -out[k];
            }
        }
    };
    let out = Dopri5::new(tol, tol).integrate(rhs, T::zero(), frame.as_slice(), T::one(), |_, _, _| ControlFlow::Continue(()))?;
    Ok(DMatrix::from_column_slice(n, n, &out.y))
}

/// Largest accepted tolerance for transport.
pub const MAX_TRANSPORT_TOL: f64 = 1e-8;

/// Parallel transport along the curve, as the matrix whose column `j` is the
/// transported coordinate vector `d_j` (coordinate components at the end).
pub fn parallel_transport<T: Real>(model: &ModelSpec<T>, curve: &CurveSpec<T>, tol: T) -> Result<DMatrix<T>> {
    if !(tol > T::zero() && tol <= T::lit(MAX_TRANSPORT_TOL)) {
        return Err(Error::InvalidValue(format!("transport tolerance must lie in (0, 1e-8], got {:e}", tol.as_f64())));
    }
    let n = model.n();
    let mut frame = DMatrix::identity(n, n);
    for w in curve.vertices.windows(2) {
        frame = transport_segment(model, &w[0], &w[1], &frame, tol)?;
    }
    Ok(frame)
}

/// Straight curve from the origin to `sigma . origin` for the two generator
/// shapes `(0, r, w)` and `(k, 0, 0)`.
pub fn generator_curve<T: Real>(model: &ModelSpec<T>, sigma: &GroupElement<T>) -> Result<CurveSpec<T>> {
    if !sigma.model().same_as(model) {
        return Err(Error::ModelMismatch);
    }
    let origin = Point::origin(model.n());
    let trivial_u = sigma.u.u0.amax() == T::zero() && sigma.u.w0.amax() == T::zero();
    if sigma.k != 0 && !(trivial_u && sigma.x == T::zero()) {
        return Err(Error::NotAGenerator);
    }
    if sigma.k != 0 {
        let end = Point::new(T::lit(sigma.k as f64) * model.period(), T::zero(), DVector::zeros(model.fiber_dim()));
        return Ok(CurveSpec::segment(origin, end));
    }
    let (w, dw) = (&sigma.u.u0, &sigma.u.w0);
    let end = Point::new(T::zero(), sigma.x - dw.dot(w), w.clone());
    if end == origin {
        return Ok(CurveSpec::constant(origin));
    }
    Ok(CurveSpec::segment(origin, end))
}

/// Frame `(S, E_i, T)` at `p` as columns in coordinates.
pub fn frame_matrix<T: Real>(model: &ModelSpec<T>, p: &Point<T>) -> DMatrix<T> {
    let n = model.n();
    let mut fr = DMatrix::zeros(n, n);
    fr[(S_IDX, 0)] = T::one();
    for i in 0..n - 2 {
        fr[(X0 + i, 1 + i)] = T::one();
    }
    fr[(T_IDX, n - 1)] = T::lit(2.0);
    fr[(S_IDX, n - 1)] = -T::lit(2.0) * model.kappa(p);
    fr
}

/// Gram matrix of the frame.
pub fn frame_gram<T: Real>(n: usize) -> DMatrix<T> {
    let mut g = DMatrix::identity(n, n);
    g[(0, 0)] = T::zero();
    g[(n - 1, n - 1)] = T::zero();
    g[(0, n - 1)] = T::one();
    g[(n - 1, 0)] = T::one();
    g
}

fn frame_inverse<T: Real>(fr: &DMatrix<T>) -> DMatrix<T> {
    fr.clone().try_inverse().expect("frame matrix is invertible")
}

/// Linear map of a tangent space written in the frame `(S, E_i, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMatrix<T: Real> {
    pub matrix: DMatrix<T>,
}

impl<T: Real> TransportMatrix<T> {
    pub fn identity(n: usize) -> Self {
        Self { matrix: DMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |M^T G M - G|`.
    pub fn gram_residual(&self) -> T {
        let g = frame_gram::<T>(self.dim());
        (self.matrix.transpose() * &g * &self.matrix - g).amax()
    }

    /// `max |M S - S|`.
    pub fn s_residual(&self) -> T {
        let mut e = DVector::zeros(self.dim());
        e[0] = T::one();
        (self.matrix.column(0) - e).amax()
    }

    /// Deviation of the `E` block from the identity.
    pub fn e_block_residual(&self) -> T {
        let m = self.dim() - 2;
        (self.matrix.view((1, 1), (m, m)) - DMatrix::identity(m, m)).amax()
    }

    pub fn identity_residual(&self) -> T {
        (&self.matrix - DMatrix::identity(self.dim(), self.dim())).amax()
    }

    /// Errors unless `S` is fixed to `s_tol` and the `E` block is the
    /// identity to `e_tol`.
    pub fn check_translation_block(&self, s_tol: T, e_tol: T) -> Result<()> {
        let (s, e) = (self.s_residual(), self.e_block_residual());
        if s > s_tol {
            return Err(Error::BlockViolation(format!("S moved by {:e}", s.as_f64())));
        }
        if e > e_tol {
            return Err(Error::BlockViolation(format!("E block deviates by {:e}", e.as_f64())));
        }
        Ok(())
    }
}

/// Holonomy of the loop in the quotient defined by `sigma`: transport along
/// the generator curve, then pull back with `d(sigma^{-1})`.
pub fn quotient_transport<T: Real>(model: &ModelSpec<T>, sigma: &GroupElement<T>, tol: T) -> Result<TransportMatrix<T>> {
    let curve = generator_curve(model, sigma)?;
    let p = parallel_transport(model, &curve, tol)?;
    let inv = g_inverse(sigma)?;
    let end = curve.end().clone();
    let back = g_act_jacobian(&inv, &end)?;
    let origin = Point::origin(model.n());
    debug_assert!((g_act(&inv, &end)?.coords() - origin.coords()).amax() < T::lit(1e-6));
    let fr = frame_matrix(model, &origin);
    Ok(TransportMatrix { matrix: frame_inverse(&fr) * back * p * fr })
}

/// Sign of the `Xi_2` entries in the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// `S`-row carries `+Xi_2`, the `T` column `-Xi_2`.
    RowPlus,
    /// The opposite assignment.
    RowMinus,
}

/// Closed-form transport of `(0, r, w)`, with `Xi_1 = 2 |w'(0)|^2` and
/// `Xi_2 = 2 w'(0)`:
///
/// ```text
/// [ 1  +Xi_2^T  -Xi_1 ]
/// [ 0    I      -Xi_2 ]
/// [ 0    0        1   ]
/// ```
/// (signs of `Xi_2` swapped under [`SignConvention::RowMinus`]).
pub fn closed_form_transport<T: Real>(
    model: &ModelSpec<T>,
    sigma: &GroupElement<T>,
    convention: SignConvention,
) -> Result<TransportMatrix<T>> {
    if sigma.k != 0 {
        return Err(Error::NotInSigmaForm);
    }
    let n = model.n();
    let dw = &sigma.u.w0;
    let xi1 = T::lit(2.0) * dw.norm_squared();
    let sign = match convention {
        SignConvention::RowPlus => T::one(),
        SignConvention::RowMinus => -T::one(),
    };
    let mut m = DMatrix::identity(n, n);
    for i in 0..n - 2 {
        let xi2 = T::lit(2.0) * dw[i];
        m[(0, 1 + i)] = sign * xi2;
        m[(1 + i, n - 1)] = -sign * xi2;
    }
    m[(0, n - 1)] = -xi1;
    Ok(TransportMatrix { matrix: m })
}

/// Picks the convention that reproduces the numeric transport of `probe`.
pub fn resolve_sign_convention<T: Real>(model: &ModelSpec<T>, probe: &GroupElement<T>, tol: T) -> Result<(SignConvention, T)> {
    let numeric = quotient_transport(model, probe, tol)?;
    let dev = |c| -> Result<T> { Ok((closed_form_transport(model, probe, c)?.matrix - &numeric.matrix).amax()) };
    let (plus, minus) = (dev(SignConvention::RowPlus)?, dev(SignConvention::RowMinus)?);
    Ok(if plus <= minus { (SignConvention::RowPlus, plus) } else { (SignConvention::RowMinus, minus) })
}

/// Rectangular loop `p -> p + h1 e_a -> p + h1 e_a + h2 e_b -> p + h2 e_b -> p`.
pub fn rectangle_loop<T: Real>(base: &Point<T>, a: usize, b: usize, h1: T, h2: T) -> CurveSpec<T> {
    let p1 = base.shifted(a, h1);
    let p2 = p1.shifted(b, h2);
    let p3 = base.shifted(b, h2);
    CurveSpec::polyline(vec![base.clone(), p1, p2, p3, base.clone()])
}

/// Transport around a loop based at `loop_.start()`, in the frame there.
pub fn loop_holonomy<T: Real>(model: &ModelSpec<T>, curve: &CurveSpec<T>, tol: T) -> Result<TransportMatrix<T>> {
    let p = parallel_transport(model, curve, tol)?;
    let fr = frame_matrix(model, curve.start());
    Ok(TransportMatrix { matrix: frame_inverse(&fr) * p * fr })
}

#[derive(Debug, Clone, Serialize)]
pub struct HolonomySampleReport {
    pub count: usize,
    pub seed: u64,
    pub loop_scale: f64,
    /// Fraction of loops whose transport lies in the translation block.
    pub pass_rate: f64,
    pub max_s_residual: f64,
    pub max_e_block_residual: f64,
    pub max_gram_residual: f64,
    /// Largest deviation from the identity (shows the loops are not trivial).
    pub max_identity_residual: f64,
}

pub const SAMPLER_S_TOL: f64 = 1e-9;
pub const SAMPLER_E_TOL: f64 = 1e-6;

/// Transports around `count` random rectangles in coordinate planes through
/// random base points (`|component| <= 2`), with sides up to `loop_scale`.
pub fn holonomy_sampler<T: Real + Send + Sync>(model: &ModelSpec<T>, count: usize, loop_scale: T, seed: u64) -> Result<HolonomySampleReport> {
    if !(loop_scale > T::zero() && loop_scale <= T::one()) {
        return Err(Error::InvalidValue(format!("loop scale must lie in (0, 1], got {}", loop_scale.as_f64())));
    }
    let n = model.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loops: Vec<_> = (0..count)
        .map(|_| {
            let coords: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-2.0..=2.0))).collect();
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            let h1 = loop_scale * T::lit(rng.gen_range(0.5..=1.0));
            let h2 = loop_scale * T::lit(rng.gen_range(0.5..=1.0));
            rectangle_loop(&Point::from_coords(&coords), a, b, h1, h2)
        })
        .collect();
    let tol = T::lit(1e-10);
    let mats = loops.par_iter().map(|c| loop_holonomy(model, c, tol)).collect::<Result<Vec<_>>>()?;
    let (s_tol, e_tol) = (T::lit(SAMPLER_S_TOL), T::lit(SAMPLER_E_TOL));
    let mut rep = HolonomySampleReport {
        count,
        seed,
        loop_scale: loop_scale.as_f64(),
        pass_rate: 0.0,
        max_s_residual: 0.0,
        max_e_block_residual: 0.0,
        max_gram_residual: 0.0,
        max_identity_residual: 0.0,
    };
    let mut passed = 0usize;
    for m in &mats {
        passed += m.check_translation_block(s_tol, e_tol).is_ok() as usize;
        rep.max_s_residual = rep.max_s_residual.max(m.s_residual().as_f64());
        rep.max_e_block_residual = rep.max_e_block_residual.max(m.e_block_residual().as_f64());
        rep.max_gram_residual = rep.max_gram_residual.max(m.gram_residual().as_f64());
        rep.max_identity_residual = rep.max_identity_residual.max(m.identity_residual().as_f64());
    }
    rep.pass_rate = if count == 0 { 1.0 } else { passed as f64 / count as f64 };
    Ok(rep)
}
