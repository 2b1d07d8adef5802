//! Geodesics of the model metric and the long-horizon completeness probe.

use std::ops::ControlFlow;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hill::HillSolution;
use crate::model::{ModelSpec, Point, Tangent, S_IDX, T_IDX, X0};
use crate::ode::{hermite3, hermite5, locate, Dopri5};
use crate::scalar::Real;

/// Largest tolerance accepted by [`geodesic_integrate`].
pub const MAX_GEODESIC_TOL: f64 = 1e-8;

/// Integrator tolerance of the completeness probe.
pub const PROBE_TOL: f64 = 1e-12;

/// State norm beyond which an integration is declared blown up.
const BLOWUP_NORM: f64 = 1e150;

/// Geodesic equations written out from the nonzero Christoffel symbols:
/// `t'' = 0`, `s'' = -(d_t kappa t'^2 + 2 t' <grad kappa, x'>)`,
/// `x'' = 1/2 grad kappa t'^2`. Allocation free; this is the hot loop of the
/// long-horizon probe.
fn geodesic_rhs<T: Real>(model: &ModelSpec<T>) -> impl Fn(T, &[T], &mut [T]) + '_ {
    let n = model.n();
    let m = n - 2;
    let a: Vec<T> = model.a().transpose().as_slice().to_vec();
    move |_tau, y, dy| {
        let (t, tdot) = (y[T_IDX], y[n + T_IDX]);
        let x = &y[X0..n];
        let xdot = &y[n + X0..2 * n];
        let (f, fd) = model.fourier().value_and_slope(t);
        dy[..n].copy_from_slice(&y[n..]);
        let mut norm2 = T::zero();
        let mut pair = T::zero();
        let half_rate = T::lit(0.5) * tdot * tdot;
        for i in 0..m {
            let mut ax = T::zero();
            for j in 0..m {
                ax += a[i * m + j] * x[j];
            }
            let g = T::lit(2.0) * (f * x[i] + ax);
            pair += g * xdot[i];
            norm2 += x[i] * x[i];
            dy[n + X0 + i] = half_rate * g;
        }
        dy[n + T_IDX] = T::zero();
        dy[n + S_IDX] = -(fd * norm2 * tdot * tdot + T::lit(2.0) * tdot * pair);
    }
}

/// `g(v, v)` for the stacked state `(x, v)`.
fn energy_of<T: Real>(model: &ModelSpec<T>, y: &[T]) -> T {
    let n = model.n();
    let m = n - 2;
    let a = model.a();
    let (t, x, v) = (y[T_IDX], &y[X0..n], &y[n..]);
    let f = model.f(t);
    let mut kappa = T::zero();
    let mut speed = T::zero();
    for i in 0..m {
        let mut ax = T::zero();
        for j in 0..m {
            ax += a[(i, j)] * x[j];
        }
        kappa += f * x[i] * x[i] + x[i] * ax;
        speed += v[X0 + i] * v[X0 + i];
    }
    kappa * v[T_IDX] * v[T_IDX] + v[T_IDX] * v[S_IDX] + speed
}

fn check_tol<T: Real>(tol: T) -> Result<()> {
    if !(tol > T::zero() && tol <= T::lit(MAX_GEODESIC_TOL)) {
        return Err(Error::InvalidValue(format!("geodesic tolerance must lie in (0, 1e-8], got {:e}", tol.as_f64())));
    }
    Ok(())
}

/// Integrated geodesic with dense output.
#[derive(Debug, Clone)]
pub struct GeodesicPath<T: Real> {
    n: usize,
    taus: Vec<T>,
    states: Vec<Vec<T>>,
    derivs: Vec<Vec<T>>,
    /// `g(gamma', gamma')` at each knot.
    pub energies: Vec<T>,
}

impl<T: Real> GeodesicPath<T> {
    pub fn span(&self) -> (T, T) {
        (self.taus[0], *self.taus.last().unwrap())
    }

    pub fn knots(&self) -> &[T] {
        &self.taus
    }

    /// Position and velocity at `tau` (clamped to the span).
    pub fn eval(&self, tau: T) -> (Point<T>, Tangent<T>) {
        let n = self.n;
        let (x, v) = if self.taus.len() == 1 {
            (self.states[0][..n].to_vec(), self.states[0][n..].to_vec())
        } else {
            let i = locate(&self.taus, tau);
            let (ta, tb) = (self.taus[i], self.taus[i + 1]);
            let (ya, yb, da, db) = (&self.states[i], &self.states[i + 1], &self.derivs[i], &self.derivs[i + 1]);
            let x = (0..n)
                .map(|k| hermite5(ta, tb, ya[k], ya[n + k], da[n + k], yb[k], yb[n + k], db[n + k], tau))
                .collect::<Vec<_>>();
            let v = (0..n).map(|k| hermite3(ta, tb, ya[n + k], da[n + k], yb[n + k], db[n + k], tau)).collect::<Vec<_>>();
            (x, v)
        };
        let p = Point::from_coords(&x);
        let t = Tangent::from_components(p.clone(), &v);
        (p, t)
    }

    /// Largest `|E(tau) - E(0)| / (1 + |E(0)|)` over the knots.
    pub fn energy_drift(&self) -> T {
        let e0 = self.energy_at_origin();
        self.energies.iter().fold(T::zero(), |m, &e| m.max((e - e0).abs() / (T::one() + e0.abs())))
    }

    fn energy_at_origin(&self) -> T {
        let i = self.taus.iter().position(|&t| t == T::zero()).unwrap_or(0);
        self.energies[i]
    }

    /// Largest `|t'(tau) - t'(0)|` over the knots.
    pub fn t_rate_drift(&self) -> T {
        let n = self.n;
        let v0 = self.states[0][n + T_IDX];
        self.states.iter().fold(T::zero(), |m, y| m.max((y[n + T_IDX] - v0).abs()))
    }

    /// Largest drift of `g(gamma', d_s) = t'/2` along the path.
    pub fn null_pairing_drift(&self) -> T {
        self.t_rate_drift() * T::lit(0.5)
    }
}

/// Solves the geodesic equation from `(p0, v0)` over `span = (tau_lo, tau_hi)`,
/// which must contain `0`.
pub fn geodesic_integrate<T: Real>(
    model: &ModelSpec<T>,
    p0: &Point<T>,
    v0: &Tangent<T>,
    span: (T, T),
    tol: T,
) -> Result<GeodesicPath<T>> {
    check_tol(tol)?;
    let n = model.n();
    if p0.v.len() != n - 2 || v0.dv.len() != n - 2 {
        return Err(Error::DimensionMismatch { expected: n - 2, found: p0.v.len().min(v0.dv.len()) });
    }
    let (lo, hi) = span;
    if !(lo <= T::zero() && T::zero() <= hi) {
        return Err(Error::InvalidValue("geodesic span must contain tau = 0".into()));
    }
    let mut y0 = p0.coords().as_slice().to_vec();
    y0.extend_from_slice(v0.components().as_slice());
    let rhs = geodesic_rhs(model);
    let mut d0 = vec![T::zero(); 2 * n];
    rhs(T::zero(), &y0, &mut d0);
    let ig = Dopri5::new(tol, tol);

    let run = |end: T| -> Result<Vec<(T, Vec<T>, Vec<T>)>> {
        let mut out = Vec::new();
        let mut blow = None;
        ig.integrate(&rhs, T::zero(), &y0, end, |tau, y, dy| {
            let norm = y.iter().fold(T::zero(), |m, x| m.max(x.abs()));
            if !(norm < T::lit(BLOWUP_NORM)) {
                blow = Some(Error::BlowUp { tau: tau.as_f64(), norm: norm.as_f64() });
                return ControlFlow::Break(());
            }
            out.push((tau, y.to_vec(), dy.to_vec()));
            ControlFlow::Continue(())
        })?;
        match blow {
            Some(e) => Err(e),
            None => Ok(out),
        }
    };
    let back = run(lo)?;
    let fwd = run(hi)?;
    let mut knots: Vec<_> = back.into_iter().rev().collect();
    knots.push((T::zero(), y0.clone(), d0));
    knots.extend(fwd);

    let mut path = GeodesicPath { n, taus: vec![], states: vec![], derivs: vec![], energies: vec![] };
    for (tau, y, dy) in knots {
        path.energies.push(energy_of(model, &y));
        path.taus.push(tau);
        path.states.push(y);
        path.derivs.push(dy);
    }
    Ok(path)
}

/// Fiber part of a geodesic as a Hill solution: `x(tau) = u(t0 + a tau)`.
#[derive(Debug, Clone)]
pub struct ReducedPath<T: Real> {
    pub a: T,
    pub t0: T,
    pub solution: HillSolution<T>,
}

impl<T: Real> ReducedPath<T> {
    /// `(x(tau), dx/dtau)`.
    pub fn eval(&self, tau: T) -> Result<(DVector<T>, DVector<T>)> {
        let (u, du) = self.solution.try_eval(self.t0 + self.a * tau)?;
        Ok((u, du * self.a))
    }
}

/// Reduced fiber system `x'' = a^2 (f(t) + A) x` along `t = t0 + a tau`,
/// solved by superposition of fundamental solutions.
pub fn reduced_system<T: Real>(
    model: &ModelSpec<T>,
    a: T,
    t0: T,
    x0: &DVector<T>,
    xdot0: &DVector<T>,
) -> Result<ReducedPath<T>> {
    if a == T::zero() || !a.is_finite() {
        return Err(Error::InvalidValue("reduced system needs a nonzero rate a = dt/dtau".into()));
    }
    let solution = HillSolution::with_data_at(model, t0, x0, &(xdot0 / a))?;
    Ok(ReducedPath { a, t0, solution })
}

/// Summary of [`completeness_probe`].
#[derive(Debug, Clone, Serialize)]
pub struct CompletenessReport {
    pub trials: usize,
    pub horizon: f64,
    pub seed: u64,
    /// Trials that stopped before reaching both ends of the horizon.
    pub blowups: usize,
    /// Largest `|x|` of the fiber components over all trials and times.
    pub max_norm: f64,
    /// Every trial stays below its Gronwall envelope.
    pub envelope_ok: bool,
    /// Largest relative energy drift over all trials.
    pub max_energy_drift: f64,
    /// Largest `|t'(tau) - t'(0)|` over all trials.
    pub max_t_rate_drift: f64,
}

/// Initial data drawn uniformly with `|component| <= 2`.
pub fn random_initial_data<T: Real, R: Rng>(model: &ModelSpec<T>, rng: &mut R) -> (Point<T>, Tangent<T>) {
    let n = model.n();
    let mut draw = || T::lit(rng.gen_range(-2.0..=2.0));
    let coords: Vec<T> = (0..n).map(|_| draw()).collect();
    let vel: Vec<T> = (0..n).map(|_| draw()).collect();
    let p = Point::from_coords(&coords);
    let v = Tangent::from_components(p.clone(), &vel);
    (p, v)
}

struct TrialOutcome {
    blew_up: bool,
    max_norm: f64,
    envelope_ok: bool,
    energy_drift: f64,
    t_rate_drift: f64,
}

fn run_trial<T: Real>(model: &ModelSpec<T>, p0: &Point<T>, v0: &Tangent<T>, horizon: T, tol: T) -> Result<TrialOutcome> {
    let n = model.n();
    let m = n - 2;
    let mut y0 = p0.coords().as_slice().to_vec();
    y0.extend_from_slice(v0.components().as_slice());
    let rhs = geodesic_rhs(model);
    let ig = Dopri5::new(tol, tol).with_max_steps(50_000_000);

    let fiber_norm = |y: &[T]| {
        let mut acc = T::zero();
        for i in 0..m {
            acc += y[X0 + i] * y[X0 + i] + y[n + X0 + i] * y[n + X0 + i];
        }
        acc.sqrt()
    };
    let a = v0.dt;
    let bound = model.fourier().sup_bound() + model.eigenvalues().iter().fold(T::zero(), |acc, l| acc.max(l.abs()));
    let rate = (T::one() + a * a * bound).as_f64();
    let log_y0 = fiber_norm(&y0).as_f64().ln();
    let e0 = energy_of(model, &y0);

    let mut out = TrialOutcome { blew_up: false, max_norm: 0.0, envelope_ok: true, energy_drift: 0.0, t_rate_drift: 0.0 };
    for end in [horizon, -horizon] {
        let res = ig.integrate(&rhs, T::zero(), &y0, end, |tau, y, _| {
            let nrm = fiber_norm(y).as_f64();
            if !(nrm.is_finite() && nrm < BLOWUP_NORM) {
                return ControlFlow::Break(());
            }
            let xnorm = (0..m).fold(0.0f64, |acc, i| acc.max(y[X0 + i].abs().as_f64()));
            out.max_norm = out.max_norm.max(xnorm);
            // Envelope in log space; a zero initial fiber state must stay zero.
            let ok = if log_y0.is_finite() {
                nrm.ln() <= log_y0 + rate * tau.as_f64().abs() + 1e-9
            } else {
                nrm == 0.0
            };
            out.envelope_ok &= ok;
            let e = energy_of(model, y);
            out.energy_drift = out.energy_drift.max(((e - e0).abs() / (T::one() + e0.abs())).as_f64());
            out.t_rate_drift = out.t_rate_drift.max((y[n + T_IDX] - a).abs().as_f64());
            ControlFlow::Continue(())
        });
        match res {
            Ok(o) if !o.stopped => {}
            Ok(_) | Err(Error::StepFailure { .. }) => out.blew_up = true,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Integrates `trials` random geodesics to `tau = +-horizon`, in parallel.
pub fn completeness_probe<T: Real + Send + Sync>(
    model: &ModelSpec<T>,
    trials: usize,
    horizon: T,
    seed: u64,
) -> Result<CompletenessReport> {
    if !(horizon > T::zero() && horizon <= T::lit(1e4)) {
        return Err(Error::InvalidValue(format!("horizon must lie in (0, 1e4], got {}", horizon.as_f64())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inits: Vec<_> = (0..trials).map(|_| random_initial_data(model, &mut rng)).collect();
    let tol = T::lit(PROBE_TOL);
    let outcomes = inits
        .par_iter()
        .map(|(p, v)| run_trial(model, p, v, horizon, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut rep = CompletenessReport {
        trials,
        horizon: horizon.as_f64(),
        seed,
        blowups: 0,
        max_norm: 0.0,
        envelope_ok: true,
        max_energy_drift: 0.0,
        max_t_rate_drift: 0.0,
    };
    for o in outcomes {
        rep.blowups += o.blew_up as usize;
        rep.max_norm = rep.max_norm.max(o.max_norm);
        rep.envelope_ok &= o.envelope_ok;
        rep.max_energy_drift = rep.max_energy_drift.max(o.energy_drift);
        rep.max_t_rate_drift = rep.max_t_rate_drift.max(o.t_rate_drift);
    }
    Ok(rep)
}

/// Largest deviation between the fiber part of full geodesics and the
/// reduced system at `tau` over `trials` random initial conditions.
pub fn reduced_agreement<T: Real + Send + Sync>(model: &ModelSpec<T>, trials: usize, tau: T, seed: u64) -> Result<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inits: Vec<_> = (0..trials).map(|_| random_initial_data(model, &mut rng)).collect();
    let devs = inits
        .par_iter()
        .map(|(p, v)| {
            let mut v = v.clone();
            // The reduction needs t to advance.
            if v.dt.abs() < T::lit(0.1) {
                v.dt = T::lit(0.5);
            }
            let span = if tau >= T::zero() { (T::zero(), tau) } else { (tau, T::zero()) };
            let path = geodesic_integrate(model, p, &v, span, T::lit(1e-11))?;
            let red = reduced_system(model, v.dt, p.t, &p.v, &v.dv)?;
            let (pt, tan) = path.eval(tau);
            let (x, xd) = red.eval(tau)?;
            Ok((&x - &pt.v).amax().max((&xd - &tan.dv).amax()))
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(devs.into_iter().fold(T::zero(), |m, d| m.max(d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, FourierSeries, Mode};
    use nalgebra::DMatrix;

    fn stable() -> ModelSpec<f64> {
        let f = FourierSeries::new(1.0, -2.0, vec![(0.5, 0.0)]).unwrap();
        build_model(5, f, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, -1.0])), Mode::Strict).unwrap()
    }

    #[test]
    fn null_line_along_s() {
        let m = stable();
        let p = Point::new(0.3, 1.0, DVector::from_vec(vec![0.5, -1.0, 2.0]));
        let v = Tangent::coordinate(p.clone(), S_IDX);
        let path = geodesic_integrate(&m, &p, &v, (-5.0, 5.0), 1e-10).unwrap();
        let (q, _) = path.eval(3.0);
        assert!((q.s - 4.0).abs() < 1e-12 && q.t == 0.3 && q.v == p.v);
    }

    #[test]
    fn spatial_line_without_t_motion() {
        let m = stable();
        let p = Point::new(0.1, 0.0, DVector::from_vec(vec![0.0, 1.0, 0.0]));
        let v = Tangent::coordinate(p.clone(), X0 + 1);
        let path = geodesic_integrate(&m, &p, &v, (0.0, 4.0), 1e-10).unwrap();
        let (q, _) = path.eval(4.0);
        assert!((q.v[1] - 5.0).abs() < 1e-10 && q.s.abs() < 1e-12 && (q.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_loose_tolerance() {
        let m = stable();
        let p = Point::origin(5);
        let v = Tangent::coordinate(p.clone(), T_IDX);
        assert!(matches!(geodesic_integrate(&m, &p, &v, (0.0, 1.0), 1e-6), Err(Error::InvalidValue(_))));
    }

    #[test]
    fn reduced_zero_data() {
        let m = stable();
        let z = DVector::zeros(3);
        let r = reduced_system(&m, 1.5, 0.2, &z, &z).unwrap();
        let (x, xd) = r.eval(7.0).unwrap();
        assert_eq!(x.amax(), 0.0);
        assert_eq!(xd.amax(), 0.0);
    }
}
