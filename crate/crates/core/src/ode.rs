//! Adaptive Dormand-Prince 5(4) integrator and Hermite dense-output helpers.
//!
//! The integrator works on flat `&[T]` states. Each accepted step is handed to
//! a callback together with the right-hand side at the new point, which is
//! exactly what the Hermite interpolants below need.

use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::scalar::Real;

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Step-size controlled explicit Runge-Kutta integrator of order 5.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5<T> {
    pub rtol: T,
    pub atol: T,
    /// Upper bound on |h|; `None` leaves the step unconstrained.
    pub h_max: Option<T>,
    pub max_steps: usize,
}

impl<T: Real> Default for Dopri5<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-10),
            atol: T::lit(1e-10),
            h_max: None,
            max_steps: 5_000_000,
        }
    }
}

/// Final state of an integration run.
#[derive(Debug, Clone)]
pub struct Outcome<T> {
    pub t: T,
    pub y: Vec<T>,
    pub steps: usize,
    /// True if the step callback requested an early stop.
    pub stopped: bool,
}

impl<T: Real> Dopri5<T> {
    pub fn new(rtol: T, atol: T) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn with_h_max(mut self, h_max: T) -> Self {
        self.h_max = Some(h_max);
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    /// Integrates `y' = rhs(t, y)` from `t0` to `t1` (either direction).
    ///
    /// `on_step(t, y, dy)` is invoked after every accepted step; returning
    /// `ControlFlow::Break` ends the run with `stopped = true`.
    pub fn integrate<F, C>(&self, mut rhs: F, t0: T, y0: &[T], t1: T, mut on_step: C) -> Result<Outcome<T>>
    where
        F: FnMut(T, &[T], &mut [T]),
        C: FnMut(T, &[T], &[T]) -> ControlFlow<()>,
    {
        let dim = y0.len();
        let mut y = y0.to_vec();
        let mut t = t0;
        if t1 == t0 {
            return Ok(Outcome { t, y, steps: 0, stopped: false });
        }
        let dir = if t1 > t0 { T::one() } else { -T::one() };
        let span = (t1 - t0).abs();

        let mut k: [Vec<T>; 7] = std::array::from_fn(|_| vec![T::zero(); dim]);
        let mut ytmp = vec![T::zero(); dim];
        let mut ynew = vec![T::zero(); dim];
        rhs(t, &y, &mut k[0]);

        let mut h = self.initial_step(&mut rhs, t, &y, &k[0], dir, span);
        let mut steps = 0usize;
        let mut rejected_last = false;
        let safety = T::lit(0.9);
        let fac_min = T::lit(0.2);
        let fac_max = T::lit(10.0);

        loop {
            let remaining = (t1 - t) * dir;
            if remaining <= T::zero() {
                break;
            }
            if steps >= self.max_steps {
                return Err(Error::StepFailure {
                    t: t.as_f64(),
                    reason: format!("step budget of {} exhausted", self.max_steps),
                });
            }
            if let Some(hm) = self.h_max {
                h = h.min(hm);
            }
            let mut last = false;
            if h >= remaining {
                h = remaining;
                last = true;
            }
            let tiny = T::lit(16.0) * T::eps() * t.abs().max(T::one());
            if h < tiny {
                return Err(Error::StepFailure {
                    t: t.as_f64(),
                    reason: "step size underflow".into(),
                });
            }
            let hs = h * dir;

            self.stages(&mut rhs, t, &y, hs, &mut k, &mut ytmp, &mut ynew);

            // Scaled RMS error norm.
            let mut acc = T::zero();
            for i in 0..dim {
                let e = hs
                    * (T::lit(E1) * k[0][i]
                        + T::lit(E3) * k[2][i]
                        + T::lit(E4) * k[3][i]
                        + T::lit(E5) * k[4][i]
                        + T::lit(E6) * k[5][i]
                        + T::lit(E7) * k[6][i]);
                let sc = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
                let r = e / sc;
                acc += r * r;
            }
            let err = (acc / T::from_usize(dim.max(1)).unwrap()).sqrt();
            if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
                h *= T::lit(0.25);
                rejected_last = true;
                continue;
            }

            if err <= T::one() {
                steps += 1;
                t = if last { t1 } else { t + hs };
                std::mem::swap(&mut y, &mut ynew);
                // FSAL: stage 7 is the derivative at the new point.
                k.swap(0, 6);
                if let ControlFlow::Break(()) = on_step(t, &y, &k[0]) {
                    return Ok(Outcome { t, y, steps, stopped: true });
                }
                if last {
                    break;
                }
                let mut fac = if err == T::zero() {
                    fac_max
                } else {
                    (safety * err.powf(T::lit(-0.2))).min(fac_max)
                };
                if rejected_last {
                    fac = fac.min(T::one());
                }
                h *= fac.max(fac_min);
                rejected_last = false;
            } else {
                let fac = (safety * err.powf(T::lit(-0.2))).max(fac_min);
                h *= fac;
                rejected_last = true;
            }
        }
        Ok(Outcome { t, y, steps, stopped: false })
    }

    #[allow(clippy::too_many_arguments)]
    fn stages<F>(&self, rhs: &mut F, t: T, y: &[T], hs: T, k: &mut [Vec<T>; 7], ytmp: &mut [T], ynew: &mut [T])
    where
        F: FnMut(T, &[T], &mut [T]),
    {
        let dim = y.len();
        let l = T::lit;
        for i in 0..dim {
            ytmp[i] = y[i] + hs * l(A21) * k[0][i];
        }
        rhs(t + l(C2) * hs, ytmp, &mut k[1]);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (l(A31) * k[0][i] + l(A32) * k[1][i]);
        }
        rhs(t + l(C3) * hs, ytmp, &mut k[2]);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (l(A41) * k[0][i] + l(A42) * k[1][i] + l(A43) * k[2][i]);
        }
        rhs(t + l(C4) * hs, ytmp, &mut k[3]);
        for i in 0..dim {
            ytmp[i] = y[i]
                + hs * (l(A51) * k[0][i] + l(A52) * k[1][i] + l(A53) * k[2][i] + l(A54) * k[3][i]);
        }
        rhs(t + l(C5) * hs, ytmp, &mut k[4]);
        for i in 0..dim {
            ytmp[i] = y[i]
                + hs * (l(A61) * k[0][i]
                    + l(A62) * k[1][i]
                    + l(A63) * k[2][i]
                    + l(A64) * k[3][i]
                    + l(A65) * k[4][i]);
        }
        rhs(t + hs, ytmp, &mut k[5]);
        for i in 0..dim {
            ynew[i] = y[i]
                + hs * (l(A71) * k[0][i]
                    + l(A73) * k[2][i]
                    + l(A74) * k[3][i]
                    + l(A75) * k[4][i]
                    + l(A76) * k[5][i]);
        }
        rhs(t + hs, ynew, &mut k[6]);
    }

    /// Starting step from the usual two-derivative estimate.
    fn initial_step<F>(&self, rhs: &mut F, t: T, y: &[T], f0: &[T], dir: T, span: T) -> T
    where
        F: FnMut(T, &[T], &mut [T]),
    {
        let dim = y.len().max(1);
        let n = T::from_usize(dim).unwrap();
        let scale = |i: usize| self.atol + self.rtol * y[i].abs();
        let d0 = (y.iter().enumerate().map(|(i, v)| (*v / scale(i)).powi(2)).fold(T::zero(), |a, b| a + b) / n).sqrt();
        let d1 = (f0.iter().enumerate().map(|(i, v)| (*v / scale(i)).powi(2)).fold(T::zero(), |a, b| a + b) / n).sqrt();
        let small = T::lit(1e-5);
        let mut h0 = if d0 < small || d1 < small { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
        h0 = h0.min(span);
        let y1: Vec<T> = y.iter().zip(f0).map(|(a, b)| *a + dir * h0 * *b).collect();
        let mut f1 = vec![T::zero(); y.len()];
        rhs(t + dir * h0, &y1, &mut f1);
        let d2 = (f1
            .iter()
            .zip(f0)
            .enumerate()
            .map(|(i, (a, b))| ((*a - *b) / scale(i)).powi(2))
            .fold(T::zero(), |a, b| a + b)
            / n)
            .sqrt()
            / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= T::lit(1e-15) {
            (h0 * T::lit(1e-3)).max(T::lit(1e-6))
        } else {
            (T::lit(0.01) / dmax).powf(T::lit(0.2))
        };
        let mut h = (T::lit(100.0) * h0).min(h1).min(span);
        if let Some(hm) = self.h_max {
            h = h.min(hm);
        }
        h
    }
}

/// Cubic Hermite interpolation of one component on `[t0, t1]`.
#[inline]
pub fn hermite3<T: Real>(t0: T, t1: T, y0: T, d0: T, y1: T, d1: T, t: T) -> T {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let h00 = two * s3 - three * s2 + T::one();
    let h10 = s3 - two * s2 + s;
    let h01 = -two * s3 + three * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Quintic Hermite interpolation using values, first and second derivatives.
#[inline]
#[allow(clippy::too_many_arguments)]
pub fn hermite5<T: Real>(t0: T, t1: T, y0: T, d0: T, dd0: T, y1: T, d1: T, dd1: T, t: T) -> T {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let l = T::lit;
    let h0 = T::one() - l(10.0) * s3 + l(15.0) * s4 - l(6.0) * s5;
    let h1 = s - l(6.0) * s3 + l(8.0) * s4 - l(3.0) * s5;
    let h2 = l(0.5) * s2 - l(1.5) * s3 + l(1.5) * s4 - l(0.5) * s5;
    let h3 = l(10.0) * s3 - l(15.0) * s4 + l(6.0) * s5;
    let h4 = -l(4.0) * s3 + l(7.0) * s4 - l(3.0) * s5;
    let h5 = l(0.5) * s3 - s4 + l(0.5) * s5;
    h0 * y0 + h1 * h * d0 + h2 * h * h * dd0 + h3 * y1 + h4 * h * d1 + h5 * h * h * dd1
}

/// Index `i` of the interval `[ts[i], ts[i+1]]` containing `t` in an
/// ascending knot sequence (clamped to the ends).
pub(crate) fn locate<T: Real>(ts: &[T], t: T) -> usize {
    debug_assert!(ts.len() >= 2);
    let pos = ts.partition_point(|x| *x <= t);
    pos.saturating_sub(1).min(ts.len() - 2)
}
