use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Finite Fourier series of period `p`:
/// `f(t) = a0 + sum_m a_m cos(2 pi m t / p) + b_m sin(2 pi m t / p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries<T> {
    period: T,
    a0: T,
    modes: Vec<(T, T)>,
}

impl<T: Real> FourierSeries<T> {
    pub fn new(period: T, a0: T, modes: Vec<(T, T)>) -> Result<Self> {
        if !(period > T::zero()) || !period.is_finite() {
            return Err(Error::InvalidPeriod(period.as_f64()));
        }
        if !a0.is_finite() || modes.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidValue("non-finite Fourier coefficient".into()));
        }
        Ok(Self { period, a0, modes })
    }

    /// The constant profile `f = c`.
    pub fn constant(period: T, c: T) -> Result<Self> {
        Self::new(period, c, Vec::new())
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn a0(&self) -> T {
        self.a0
    }

    pub fn modes(&self) -> &[(T, T)] {
        &self.modes
    }

    pub fn is_nonconstant(&self) -> bool {
        self.modes.iter().any(|(a, b)| *a != T::zero() || *b != T::zero())
    }

    pub fn value(&self, t: T) -> T {
        self.derivative(t, 0)
    }

    /// `(f(t), f'(t))` with one `sin_cos` per mode.
    pub fn value_and_slope(&self, t: T) -> (T, T) {
        let base = T::two_pi() / self.period;
        let (mut v, mut d) = (self.a0, T::zero());
        for (m, (a, b)) in self.modes.iter().enumerate() {
            let w = base * T::from_usize(m + 1).unwrap();
            let (sn, cs) = (w * t).sin_cos();
            v += *a * cs + *b * sn;
            d += w * (*b * cs - *a * sn);
        }
        (v, d)
    }

    /// Exact `order`-th derivative at `t`.
    pub fn derivative(&self, t: T, order: u32) -> T {
        let base = T::two_pi() / self.period;
        let mut acc = if order == 0 { self.a0 } else { T::zero() };
        for (m, (a, b)) in self.modes.iter().enumerate() {
            if *a == T::zero() && *b == T::zero() {
                continue;
            }
            let w = base * T::from_usize(m + 1).unwrap();
            let (sn, cs) = (w * t).sin_cos();
            // d^k/dt^k [a cos + b sin] cycles through (c, s) -> (-s, c) scaled by w.
            let wk = w.powi(order as i32);
            let (dc, ds) = match order % 4 {
                0 => (cs, sn),
                1 => (-sn, cs),
                2 => (-cs, -sn),
                _ => (sn, -cs),
            };
            acc += wk * (*a * dc + *b * ds);
        }
        acc
    }

    /// Upper bound on `|f|` from the coefficients.
    pub fn sup_bound(&self) -> T {
        self.modes
            .iter()
            .fold(self.a0.abs(), |acc, (a, b)| acc + (*a * *a + *b * *b).sqrt())
    }
}
