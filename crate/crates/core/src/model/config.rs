//! JSON model configuration.
//!
//! ```json
//! {"n": 5, "period": 1.0,
//!  "fourier": {"a0": -2.0, "modes": [[0.5, 0.0]]},
//!  "A": [[1, 0, 0], [0, 1, 0], [0, 0, -2]],
//!  "mode": "strict",
//!  "riccati_B0": [[0, 0, 0], [0, 0, 0], [0, 0, 0]],
//!  "lattice": {"generators": [{"r": 1.0, "u0": [0, 0, 0], "w0": [0, 0, 0]}]}}
//! ```
//!
//! Validation failures carry a JSON pointer to the offending value.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

use super::{build_model, FourierSeries, Mode, ModelSpec};
use crate::error::Error;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// JSON pointer (RFC 6901) of the offending value; empty for the root.
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ptr = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "{ptr}: {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(pointer: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { pointer: pointer.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGeneratorConfig {
    pub r: f64,
    pub u0: Vec<f64>,
    pub w0: Vec<f64>,
}

/// Parsed, shape-checked configuration. Numbers are kept as `f64` until
/// [`ModelConfig::build`] converts them to the working scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub n: usize,
    pub period: f64,
    pub a0: f64,
    pub modes: Vec<(f64, f64)>,
    pub a: Vec<Vec<f64>>,
    pub mode: Mode,
    pub riccati_b0: Option<Vec<Vec<f64>>>,
    pub lattice: Option<Vec<LatticeGeneratorConfig>>,
}

fn number(v: &Value, ptr: &str) -> Result<f64, ConfigError> {
    let x = v.as_f64().ok_or_else(|| err(ptr, "expected a number"))?;
    if !x.is_finite() {
        return Err(err(ptr, "number must be finite"));
    }
    Ok(x)
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, key: &str, parent: &str) -> Result<&'a Value, ConfigError> {
    obj.get(key).ok_or_else(|| err(format!("{parent}/{key}"), "missing required field"))
}

fn vector(v: &Value, ptr: &str, len: usize) -> Result<Vec<f64>, ConfigError> {
    let arr = v.as_array().ok_or_else(|| err(ptr, "expected an array"))?;
    if arr.len() != len {
        return Err(err(ptr, format!("expected {len} entries, found {}", arr.len())));
    }
    arr.iter().enumerate().map(|(i, x)| number(x, &format!("{ptr}/{i}"))).collect()
}

fn square(v: &Value, ptr: &str, size: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
    let rows = v.as_array().ok_or_else(|| err(ptr, "expected an array of rows"))?;
    if rows.len() != size {
        return Err(err(ptr, format!("expected {size} rows, found {}", rows.len())));
    }
    rows.iter().enumerate().map(|(i, row)| vector(row, &format!("{ptr}/{i}"), size)).collect()
}

fn to_matrix<T: Real>(rows: &[Vec<f64>]) -> DMatrix<T> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| T::lit(rows[i][j]))
}

impl ModelConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let v: Value = serde_json::from_str(text).map_err(|e| err("", format!("invalid JSON: {e}")))?;
        Self::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<Self, ConfigError> {
        let root = v.as_object().ok_or_else(|| err("", "expected a JSON object"))?;
        let n_val = field(root, "n", "")?;
        let n = n_val.as_u64().ok_or_else(|| err("/n", "expected a non-negative integer"))? as usize;
        if n < 4 {
            return Err(err("/n", format!("dimension n = {n} is below the minimum 4")));
        }
        let period = number(field(root, "period", "")?, "/period")?;
        if period <= 0.0 {
            return Err(err("/period", "period must be positive"));
        }
        let fourier = field(root, "fourier", "")?.as_object().ok_or_else(|| err("/fourier", "expected an object"))?;
        let a0 = number(field(fourier, "a0", "/fourier")?, "/fourier/a0")?;
        let modes_v = field(fourier, "modes", "/fourier")?
            .as_array()
            .ok_or_else(|| err("/fourier/modes", "expected an array of [a_m, b_m] pairs"))?;
        let modes = modes_v
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let ptr = format!("/fourier/modes/{i}");
                let ab = vector(p, &ptr, 2)?;
                Ok((ab[0], ab[1]))
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let a = square(field(root, "A", "")?, "/A", n - 2)?;
        let mode = match root.get("mode") {
            None => Mode::Strict,
            Some(Value::String(s)) if s == "strict" => Mode::Strict,
            Some(Value::String(s)) if s == "relaxed" => Mode::Relaxed,
            Some(_) => return Err(err("/mode", "expected \"strict\" or \"relaxed\"")),
        };
        let riccati_b0 = match root.get("riccati_B0") {
            None | Some(Value::Null) => None,
            Some(b) => Some(square(b, "/riccati_B0", n - 2)?),
        };
        let lattice = match root.get("lattice") {
            None | Some(Value::Null) => None,
            Some(l) => {
                let obj = l.as_object().ok_or_else(|| err("/lattice", "expected an object"))?;
                let gens = field(obj, "generators", "/lattice")?
                    .as_array()
                    .ok_or_else(|| err("/lattice/generators", "expected an array"))?;
                let parsed = gens
                    .iter()
                    .enumerate()
                    .map(|(i, g)| {
                        let ptr = format!("/lattice/generators/{i}");
                        let o = g.as_object().ok_or_else(|| err(&ptr, "expected an object"))?;
                        Ok(LatticeGeneratorConfig {
                            r: number(field(o, "r", &ptr)?, &format!("{ptr}/r"))?,
                            u0: vector(field(o, "u0", &ptr)?, &format!("{ptr}/u0"), n - 2)?,
                            w0: vector(field(o, "w0", &ptr)?, &format!("{ptr}/w0"), n - 2)?,
                        })
                    })
                    .collect::<Result<Vec<_>, ConfigError>>()?;
                Some(parsed)
            }
        };
        Ok(Self { n, period, a0, modes, a, mode, riccati_b0, lattice })
    }

    /// Builds the validated model, mapping model errors onto config pointers.
    pub fn build<T: Real>(&self) -> Result<ModelSpec<T>, ConfigError> {
        let fourier = FourierSeries::new(
            T::lit(self.period),
            T::lit(self.a0),
            self.modes.iter().map(|&(a, b)| (T::lit(a), T::lit(b))).collect(),
        )
        .map_err(|e| err("/period", e.to_string()))?;
        build_model(self.n, fourier, to_matrix(&self.a), self.mode).map_err(|e| {
            let ptr = match e {
                Error::DimensionTooSmall { .. } => "/n",
                Error::ConstantF => "/fourier/modes",
                Error::InvalidPeriod(_) => "/period",
                _ => "/A",
            };
            err(ptr, e.to_string())
        })
    }

    pub fn riccati_b0<T: Real>(&self) -> Option<DMatrix<T>> {
        self.riccati_b0.as_deref().map(to_matrix)
    }

    pub fn lattice_vectors<T: Real>(&self) -> Option<Vec<(T, DVector<T>, DVector<T>)>> {
        self.lattice.as_ref().map(|gens| {
            gens.iter()
                .map(|g| {
                    (
                        T::lit(g.r),
                        DVector::from_iterator(g.u0.len(), g.u0.iter().map(|&x| T::lit(x))),
                        DVector::from_iterator(g.w0.len(), g.w0.iter().map(|&x| T::lit(x))),
                    )
                })
                .collect()
        })
    }
}
