//! Killing fields of the model, their brackets, the centralizer of `A` in
//! `so(n-2)` and the resulting isometry-algebra dimension.
//!
//! Field catalogue, with `u` a Hill solution and `F` skew with `[A, F] = 0`:
//!
//! * `Z = d_s`
//! * `E_u = u(t) . d_x - 2 <u'(t), x> d_s` (the `E_i` / `E*_i` use the
//!   canonical solutions)
//! * `X_F = (F x) . d_x`

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hill::{canonical_basis, HillSolution};
use crate::model::{sorted_symmetric_eigen, ModelSpec, Point, Tangent, S_IDX, T_IDX, X0};
use crate::scalar::Real;

/// Skew-symmetry tolerance for rotation generators.
pub const SKEW_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum KillingField<T: Real> {
    /// `d_s`.
    Z,
    /// `E_u` for a solution `u` of the Hill system.
    Translation(HillSolution<T>),
    /// `X_F` for a skew matrix `F`.
    Rotation(DMatrix<T>),
}

fn skew_residual<T: Real>(f: &DMatrix<T>) -> T {
    (f + f.transpose()).amax()
}

impl<T: Real> KillingField<T> {
    /// `E_i`, built from `xi_i = (e_i, 0)`.
    pub fn e(model: &ModelSpec<T>, i: usize) -> Self {
        Self::Translation(canonical_basis(model).0.swap_remove(i))
    }

    /// `E*_i`, built from `xi*_i = (0, e_i)`.
    pub fn e_star(model: &ModelSpec<T>, i: usize) -> Self {
        Self::Translation(canonical_basis(model).1.swap_remove(i))
    }

    pub fn x_f(f: DMatrix<T>) -> Result<Self> {
        if !f.is_square() {
            return Err(Error::DimensionMismatch { expected: f.nrows(), found: f.ncols() });
        }
        let r = skew_residual(&f);
        if r > T::lit(SKEW_TOL) * f.amax().max(T::one()) {
            return Err(Error::NotSkew(r.as_f64()));
        }
        Ok(Self::Rotation(f))
    }
}

/// The `2n - 3` fields `Z, E_1..E_{n-2}, E*_1..E*_{n-2}` with labels.
pub fn killing_catalog<T: Real>(model: &ModelSpec<T>) -> Vec<(String, KillingField<T>)> {
    let (xi, xs) = canonical_basis(model);
    let mut out = vec![("Z".to_string(), KillingField::Z)];
    out.extend(xi.into_iter().enumerate().map(|(i, u)| (format!("E_{}", i + 1), KillingField::Translation(u))));
    out.extend(xs.into_iter().enumerate().map(|(i, u)| (format!("E*_{}", i + 1), KillingField::Translation(u))));
    out
}

/// Components of the field at `point`.
pub fn killing_eval<T: Real>(model: &ModelSpec<T>, field: &KillingField<T>, point: &Point<T>) -> Tangent<T> {
    let m = model.fiber_dim();
    match field {
        KillingField::Z => {
            let mut t = Tangent::zero(point.clone());
            t.ds = T::one();
            t
        }
        KillingField::Translation(u) => {
            let (x, dx) = u.eval(point.t);
            Tangent::new(point.clone(), T::zero(), -T::lit(2.0) * dx.dot(&point.v), x)
        }
        KillingField::Rotation(f) => {
            debug_assert_eq!(f.nrows(), m);
            Tangent::new(point.clone(), T::zero(), T::zero(), f * &point.v)
        }
    }
}

/// `J[a][b] = d_b X^a` at `point`, from the closed-form field expressions.
pub fn killing_jacobian<T: Real>(model: &ModelSpec<T>, field: &KillingField<T>, point: &Point<T>) -> DMatrix<T> {
    let n = model.n();
    let m = n - 2;
    let mut j = DMatrix::zeros(n, n);
    match field {
        KillingField::Z => {}
        KillingField::Translation(u) => {
            let (x, dx) = u.eval(point.t);
            let ddx = model.k_matrix(point.t) * x;
            for i in 0..m {
                j[(X0 + i, T_IDX)] = dx[i];
                j[(S_IDX, X0 + i)] = -T::lit(2.0) * dx[i];
            }
            j[(S_IDX, T_IDX)] = -T::lit(2.0) * ddx.dot(&point.v);
        }
        KillingField::Rotation(f) => {
            j.view_mut((X0, X0), (m, m)).copy_from(f);
        }
    }
    j
}

/// Largest `|g(nabla_b X, d_c) + g(d_b, nabla_c X)|` over the samples and all
/// coordinate pairs `(b, c)`.
pub fn killing_residual<T: Real>(model: &ModelSpec<T>, field: &KillingField<T>, samples: &[Point<T>]) -> T {
    let n = model.n();
    let mut worst = T::zero();
    for p in samples {
        let x = killing_eval(model, field, p).components();
        let mut cov = killing_jacobian(model, field, p);
        let gam = model.christoffel_at(p);
        for a in 0..n {
            for b in 0..n {
                let mut acc = T::zero();
                for c in 0..n {
                    acc += gam.get(a, b, c) * x[c];
                }
                cov[(a, b)] += acc;
            }
        }
        // lowered[c][b] = g_{ca} nabla_b X^a
        let lowered = model.metric_matrix(p) * &cov;
        for b in 0..n {
            for c in 0..n {
                worst = worst.max((lowered[(c, b)] + lowered[(b, c)]).abs());
            }
        }
    }
    worst
}

/// `[X, Y]^a = X^b d_b Y^a - Y^b d_b X^a` at `point`.
pub fn lie_bracket<T: Real>(
    model: &ModelSpec<T>,
    x: &KillingField<T>,
    y: &KillingField<T>,
    point: &Point<T>,
) -> DVector<T> {
    let xv = killing_eval(model, x, point).components();
    let yv = killing_eval(model, y, point).components();
    killing_jacobian(model, y, point) * xv - killing_jacobian(model, x, point) * yv
}

/// Deviations from `[X_F, E_i] = sum_l F_il E_l`, the same for `E*_i`, and
/// `[X_F, Z] = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct CommutatorReport {
    pub max_dev_e: f64,
    pub max_dev_e_star: f64,
    pub max_dev_z: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn commutator_check<T: Real>(
    model: &ModelSpec<T>,
    f: &DMatrix<T>,
    samples: &[Point<T>],
    tol: T,
) -> Result<CommutatorReport> {
    let xf = KillingField::x_f(f.clone())?;
    let m = model.fiber_dim();
    if f.nrows() != m {
        return Err(Error::DimensionMismatch { expected: m, found: f.nrows() });
    }
    let (xi, xs) = canonical_basis(model);
    let mut dev = [T::zero(); 3];
    for p in samples {
        for (slot, family) in [(0usize, &xi), (1, &xs)] {
            let fields: Vec<_> = family.iter().map(|u| KillingField::Translation(u.clone())).collect();
            let values: Vec<_> = fields.iter().map(|k| killing_eval(model, k, p).components()).collect();
            for i in 0..m {
                let lhs = lie_bracket(model, &xf, &fields[i], p);
                let mut rhs = DVector::zeros(m + 2);
                for l in 0..m {
                    rhs += &values[l] * f[(i, l)];
                }
                dev[slot] = dev[slot].max((lhs - rhs).amax());
            }
        }
        dev[2] = dev[2].max(lie_bracket(model, &xf, &KillingField::Z, p).amax());
    }
    let pass = dev.iter().all(|d| *d <= tol);
    Ok(CommutatorReport {
        max_dev_e: dev[0].as_f64(),
        max_dev_e_star: dev[1].as_f64(),
        max_dev_z: dev[2].as_f64(),
        tol: tol.as_f64(),
        pass,
    })
}

/// Frobenius-orthonormal basis of `{F skew : AF = FA}`.
#[derive(Debug, Clone)]
pub struct SkewBasis<T: Real> {
    pub matrices: Vec<DMatrix<T>>,
    /// Eigenvalue multiplicities of `A`, in descending eigenvalue order.
    pub multiplicities: Vec<usize>,
}

impl<T: Real> SkewBasis<T> {
    pub fn dim(&self) -> usize {
        self.matrices.len()
    }
}

/// Centralizer of a symmetric matrix in `so(m)`: within each eigenspace
/// with orthonormal basis `q_1..q_k`, the elements `(q_a q_b^T - q_b q_a^T) / sqrt 2`.
pub fn centralizer_basis<T: Real>(a: &DMatrix<T>) -> SkewBasis<T> {
    let eig = sorted_symmetric_eigen(a);
    let inv_sqrt2 = T::one() / T::lit(2.0).sqrt();
    let mut matrices = Vec::new();
    for range in eig.clusters() {
        for i in range.clone() {
            for j in (i + 1)..range.end {
                let qi = eig.vectors.column(i);
                let qj = eig.vectors.column(j);
                matrices.push((qi * qj.transpose() - qj * qi.transpose()) * inv_sqrt2);
            }
        }
    }
    SkewBasis { matrices, multiplicities: eig.multiplicities }
}

/// `sum m (m - 1) / 2` over eigenvalue multiplicities.
pub fn centralizer_dim_formula(multiplicities: &[usize]) -> usize {
    multiplicities.iter().map(|m| m * (m.saturating_sub(1)) / 2).sum()
}

/// Dimension report for the identity component of the isometry group.
#[derive(Debug, Clone, Serialize)]
pub struct Isom0Report {
    pub n: usize,
    pub multiplicities: Vec<usize>,
    pub dim_s: usize,
    pub dim_isom0: usize,
    /// `trace(f I + A) = (n - 2) f` is nonconstant, which rules out the
    /// extra fields of homogeneous plane waves.
    pub trace_k_nonconstant: bool,
    /// `|trace K(t) - (n - 2) f(t)|`, which is independent of `t`.
    pub trace_k_residual: f64,
}

pub fn isom0_dimension<T: Real>(model: &ModelSpec<T>) -> Isom0Report {
    let basis = centralizer_basis(model.a());
    let n = model.n();
    // trace K(t) - (n - 2) f(t) = trace A for every t.
    let trace_k_residual = model.a().trace().abs();
    Isom0Report {
        n,
        multiplicities: basis.multiplicities.clone(),
        dim_s: basis.dim(),
        dim_isom0: 2 * n - 3 + basis.dim(),
        trace_k_nonconstant: model.fourier().is_nonconstant(),
        trace_k_residual: trace_k_residual.as_f64(),
    }
}

/// `exp(tau F)`.
pub fn rotation_flow<T: Real>(f: &DMatrix<T>, tau: T) -> Result<DMatrix<T>> {
    let r = skew_residual(f);
    if r > T::lit(SKEW_TOL) * f.amax().max(T::one()) {
        return Err(Error::NotSkew(r.as_f64()));
    }
    Ok((f * tau).exp())
}

/// Closed form of `exp(tau F)` for `3 x 3` skew `F`:
/// `I + (sin th / th) X + ((1 - cos th) / th^2) X^2` with `X = tau F`.
pub fn rodrigues<T: Real>(f: &DMatrix<T>, tau: T) -> Result<DMatrix<T>> {
    if f.nrows() != 3 || f.ncols() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: f.nrows() });
    }
    let r = skew_residual(f);
    if r > T::lit(SKEW_TOL) * f.amax().max(T::one()) {
        return Err(Error::NotSkew(r.as_f64()));
    }
    let x = f * tau;
    let theta = (x.norm_squared() * T::lit(0.5)).sqrt();
    let id = DMatrix::identity(3, 3);
    if theta < T::lit(1e-8) {
        return Ok(id + &x + &x * &x * T::lit(0.5));
    }
    let x2 = &x * &x;
    Ok(id + x * (theta.sin() / theta) + x2 * ((T::one() - theta.cos()) / (theta * theta)))
}

/// Flow of `X_F` applied to a point: `(t, s, exp(tau F) v)`.
pub fn rotate_point<T: Real>(f: &DMatrix<T>, tau: T, p: &Point<T>) -> Result<Point<T>> {
    let r = rotation_flow(f, tau)?;
    Ok(Point::new(p.t, p.s, r * &p.v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, FourierSeries, Mode};

    fn model() -> ModelSpec<f64> {
        let f = FourierSeries::new(1.0, 0.0, vec![(1.0, 0.0)]).unwrap();
        build_model(5, f, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -2.0])), Mode::Strict).unwrap()
    }

    #[test]
    fn field_values() {
        let m = model();
        let p = Point::new(0.0, 2.0, DVector::from_vec(vec![0.3, -1.0, 4.0]));
        let z = killing_eval(&m, &KillingField::Z, &p);
        assert_eq!((z.dt, z.ds, z.dv.amax()), (0.0, 1.0, 0.0));
        let e1 = killing_eval(&m, &KillingField::e(&m, 0), &p);
        assert_eq!(e1.components().as_slice(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
        let f = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let xf = KillingField::x_f(f).unwrap();
        assert_eq!(killing_eval(&m, &xf, &Point::origin(5)).components().amax(), 0.0);
    }

    #[test]
    fn n5_example_centralizer() {
        let basis = centralizer_basis(&DMatrix::<f64>::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -2.0])));
        assert_eq!(basis.dim(), 1);
        let f = &basis.matrices[0];
        let expect = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let scale = f[(0, 1)];
        assert!((f - &expect * scale).amax() < 1e-12 && scale.abs() > 0.1);
        let m = model();
        assert_eq!(isom0_dimension(&m).dim_isom0, 8);
    }

    #[test]
    fn rodrigues_agrees_with_exponential() {
        let f = DMatrix::<f64>::from_row_slice(3, 3, &[0.0, 0.4, -1.1, -0.4, 0.0, 0.3, 1.1, -0.3, 0.0]);
        for &tau in &[0.0, 0.7, -2.3, 10.0] {
            let a = rotation_flow(&f, tau).unwrap();
            let b = rodrigues(&f, tau).unwrap();
            assert!((a - b).amax() < 1e-12);
        }
        assert!(matches!(rotation_flow(&DMatrix::<f64>::identity(3, 3), 1.0), Err(Error::NotSkew(_))));
    }
}
