//! Deterministic symmetric eigendecomposition.
//!
//! Eigenvalues come out in descending order. Eigenvalues closer than
//! `CLUSTER_RTOL * max|lambda|` are treated as one eigenspace; each eigenspace
//! gets a canonical orthonormal basis built by pivoted Gram-Schmidt on the
//! projected standard basis, so diagonal operators yield coordinate vectors.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

/// Relative tolerance for grouping eigenvalues into one eigenspace.
pub const CLUSTER_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SortedEigen<T: Real> {
    pub values: DVector<T>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: DMatrix<T>,
    /// Sizes of the detected eigenspaces, in the order of `values`.
    pub multiplicities: Vec<usize>,
}

impl<T: Real> SortedEigen<T> {
    /// Column ranges of the eigenspaces.
    pub fn clusters(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::with_capacity(self.multiplicities.len());
        let mut start = 0;
        for &m in &self.multiplicities {
            out.push(start..start + m);
            start += m;
        }
        out
    }
}

/// Flip `v` so that its first non-negligible component is positive.
pub(crate) fn sign_normalize<T: Real>(v: &mut DVector<T>) {
    let tol = T::lit(1e-12) * v.amax();
    if let Some(x) = v.iter().find(|x| x.abs() > tol) {
        if *x < T::zero() {
            v.neg_mut();
        }
    }
}

pub fn sorted_symmetric_eigen<T: Real>(a: &DMatrix<T>) -> SortedEigen<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    if n == 0 {
        return SortedEigen { values: DVector::zeros(0), vectors: DMatrix::zeros(0, 0), multiplicities: vec![] };
    }
    let sym = (a + a.transpose()) * T::lit(0.5);
    let eig = sym.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap_or(std::cmp::Ordering::Equal));

    let scale = eig.eigenvalues.amax();
    let tol = T::lit(CLUSTER_RTOL) * scale;

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &idx in &order {
        match groups.last_mut() {
            Some(g) if (eig.eigenvalues[*g.last().unwrap()] - eig.eigenvalues[idx]).abs() <= tol => g.push(idx),
            _ => groups.push(vec![idx]),
        }
    }

    let mut values = Vec::with_capacity(n);
    let mut columns: Vec<DVector<T>> = Vec::with_capacity(n);
    let mut multiplicities = Vec::with_capacity(groups.len());
    for g in &groups {
        let q = DMatrix::from_columns(&g.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
        let mut basis = canonical_basis(&q);
        basis.sort_by(|x, y| {
            for k in 0..n {
                match y[k].partial_cmp(&x[k]) {
                    Some(std::cmp::Ordering::Equal) | None => continue,
                    Some(o) => return o,
                }
            }
            std::cmp::Ordering::Equal
        });
        for v in basis {
            values.push((v.transpose() * &sym * &v)[(0, 0)]);
            columns.push(v);
        }
        multiplicities.push(g.len());
    }
    SortedEigen { values: DVector::from_vec(values), vectors: DMatrix::from_columns(&columns), multiplicities }
}

/// Canonical orthonormal basis of the column span of `q` (orthonormal columns).
fn canonical_basis<T: Real>(q: &DMatrix<T>) -> Vec<DVector<T>> {
    let (n, m) = q.shape();
    if m == 1 {
        let mut v = q.column(0).into_owned();
        sign_normalize(&mut v);
        return vec![v];
    }
    let proj = q * q.transpose();
    let mut chosen: Vec<DVector<T>> = Vec::with_capacity(m);
    let mut residuals: Vec<DVector<T>> = (0..n).map(|j| proj.column(j).into_owned()).collect();
    for _ in 0..m {
        let (best, _) = residuals
            .iter()
            .enumerate()
            .fold((0usize, -T::one()), |(bi, bn), (i, r)| {
                let nr = r.norm();
                if nr > bn * (T::one() + T::lit(1e-12)) { (i, nr) } else { (bi, bn) }
            });
        let mut v = residuals[best].clone();
        v /= v.norm();
        sign_normalize(&mut v);
        for r in residuals.iter_mut() {
            let c = v.dot(r);
            r.axpy(-c, &v, T::one());
        }
        chosen.push(v);
    }
    chosen
}
