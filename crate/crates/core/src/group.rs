//! The isometry group `Z x R x E` of the model, its Heisenberg part, and
//! validation of abelian lattice data.
//!
//! With `T` the period shift on solutions, the product is
//!
//! ```text
//! (k1, x1, u1) (k2, x2, u2) = (k1 + k2, x1 + x2 - Omega(u1, T^{k2} u2), T^{-k2} u1 + u2)
//! ```
//!
//! and `(k, x, u)` acts by
//! `(t, s, v) -> (t + k p, s + x - <u'(t), 2 v + u(t)>, v + u(t))`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hill::{omega_initial, shift, HillSolution};
use crate::model::{ModelSpec, Point, Tangent, S_IDX, T_IDX, X0};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct GroupElement<T: Real> {
    pub k: i64,
    pub x: T,
    pub u: HillSolution<T>,
}

impl<T: Real> GroupElement<T> {
    pub fn new(k: i64, x: T, u: HillSolution<T>) -> Self {
        Self { k, x, u }
    }

    pub fn identity(model: &ModelSpec<T>) -> Self {
        Self { k: 0, x: T::zero(), u: HillSolution::zero(model) }
    }

    pub fn model(&self) -> &ModelSpec<T> {
        self.u.model()
    }

    /// Largest difference in `(x, u0, w0)`, or infinity if the `k` differ.
    pub fn distance(&self, other: &Self) -> T {
        if self.k != other.k {
            return T::max_value().unwrap_or_else(|| T::lit(f64::MAX));
        }
        (self.x - other.x)
            .abs()
            .max((&self.u.u0 - &other.u.u0).amax())
            .max((&self.u.w0 - &other.u.w0).amax())
    }
}

fn same_model<T: Real>(a: &ModelSpec<T>, b: &ModelSpec<T>) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::ModelMismatch)
    }
}

pub fn g_identity<T: Real>(model: &ModelSpec<T>) -> GroupElement<T> {
    GroupElement::identity(model)
}

pub fn g_compose<T: Real>(g1: &GroupElement<T>, g2: &GroupElement<T>) -> Result<GroupElement<T>> {
    same_model(g1.model(), g2.model())?;
    let shifted2 = shift(&g2.u, g2.k)?;
    let x = g1.x + g2.x - omega_initial(&g1.u, &shifted2)?;
    let u = shift(&g1.u, -g2.k)?.add(&g2.u)?;
    Ok(GroupElement { k: g1.k + g2.k, x, u })
}

/// Inverse obtained by solving `g g' = e`: the third component forces
/// `u' = -T^k u`, after which the second gives `x' = -x + Omega(u, T^{-k} u')`.
pub fn g_inverse<T: Real>(g: &GroupElement<T>) -> Result<GroupElement<T>> {
    let k_inv = -g.k;
    let u_inv = shift(&g.u, g.k)?.neg();
    let x_inv = -g.x + omega_initial(&g.u, &shift(&u_inv, k_inv)?)?;
    Ok(GroupElement { k: k_inv, x: x_inv, u: u_inv })
}

fn check_point<T: Real>(model: &ModelSpec<T>, m: &Point<T>) -> Result<()> {
    if m.v.len() != model.fiber_dim() {
        return Err(Error::DimensionMismatch { expected: model.fiber_dim(), found: m.v.len() });
    }
    Ok(())
}

pub fn g_act<T: Real>(g: &GroupElement<T>, m: &Point<T>) -> Result<Point<T>> {
    check_point(g.model(), m)?;
    let (u, du) = g.u.try_eval(m.t)?;
    let p = g.model().period();
    let two_v_plus_u = &m.v * T::lit(2.0) + &u;
    Ok(Point::new(
        m.t + T::lit(g.k as f64) * p,
        m.s + g.x - du.dot(&two_v_plus_u),
        &m.v + u,
    ))
}

/// Jacobian of `g_act` at `m`, in coordinates `(t, s, x)`.
pub fn g_act_jacobian<T: Real>(g: &GroupElement<T>, m: &Point<T>) -> Result<DMatrix<T>> {
    check_point(g.model(), m)?;
    let model = g.model();
    let n = model.n();
    let (u, du) = g.u.try_eval(m.t)?;
    let ddu = model.k_matrix(m.t) * &u;
    let mut j = DMatrix::identity(n, n);
    j[(S_IDX, T_IDX)] = -(ddu.dot(&(&m.v * T::lit(2.0) + &u)) + du.norm_squared());
    for i in 0..model.fiber_dim() {
        j[(S_IDX, X0 + i)] = -T::lit(2.0) * du[i];
        j[(X0 + i, T_IDX)] = du[i];
    }
    Ok(j)
}

/// Pushforward of `x` under the action of `g`.
pub fn g_act_differential<T: Real>(g: &GroupElement<T>, x: &Tangent<T>) -> Result<Tangent<T>> {
    let base = g_act(g, &x.base)?;
    let j = g_act_jacobian(g, &x.base)?;
    Ok(Tangent::from_components(base, (j * x.components()).as_slice()))
}

/// Largest `|g(dF X, dF Y) - g(X, Y)|` for an arbitrary map given by its
/// value and Jacobian.
pub fn isometry_residual_with<T: Real, F>(model: &ModelSpec<T>, map: F, samples: &[(Point<T>, Tangent<T>, Tangent<T>)]) -> Result<T>
where
    F: Fn(&Point<T>) -> Result<(Point<T>, DMatrix<T>)>,
{
    let mut worst = T::zero();
    for (p, x, y) in samples {
        if &x.base != p || &y.base != p {
            return Err(Error::BasePointMismatch);
        }
        let (q, j) = map(p)?;
        let (xc, yc) = (x.components(), y.components());
        let before = model.metric_components(p, xc.as_slice(), yc.as_slice());
        let after = model.metric_components(&q, (&j * &xc).as_slice(), (&j * &yc).as_slice());
        worst = worst.max((after - before).abs());
    }
    Ok(worst)
}

pub fn isometry_residual<T: Real>(g: &GroupElement<T>, samples: &[(Point<T>, Tangent<T>, Tangent<T>)]) -> Result<T> {
    isometry_residual_with(g.model(), |p| Ok((g_act(g, p)?, g_act_jacobian(g, p)?)), samples)
}

/// Element of the Heisenberg group in matrix coordinates: the upper
/// unitriangular matrix with first row `(1, a, c)` and last column `(c, b, 1)`,
/// so that `(a1, b1, c1)(a2, b2, c2) = (a1 + a2, b1 + b2, c1 + c2 + <a1, b2>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeisElement<T: Real> {
    pub a: DVector<T>,
    pub b: DVector<T>,
    pub c: T,
}

impl<T: Real> HeisElement<T> {
    pub fn identity(m: usize) -> Self {
        Self { a: DVector::zeros(m), b: DVector::zeros(m), c: T::zero() }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.c - other.c).abs().max((&self.a - &other.a).amax()).max((&self.b - &other.b).amax())
    }

    /// The `(m + 2) x (m + 2)` matrix.
    pub fn to_matrix(&self) -> DMatrix<T> {
        let m = self.a.len();
        let mut mat = DMatrix::identity(m + 2, m + 2);
        for i in 0..m {
            mat[(0, 1 + i)] = self.a[i];
            mat[(1 + i, m + 1)] = self.b[i];
        }
        mat[(0, m + 1)] = self.c;
        mat
    }
}

pub fn heis_mul<T: Real>(h1: &HeisElement<T>, h2: &HeisElement<T>) -> HeisElement<T> {
    HeisElement { a: &h1.a + &h2.a, b: &h1.b + &h2.b, c: h1.c + h2.c + h1.a.dot(&h2.b) }
}

/// `(0, x, u) -> (-x, u)` followed by the Darboux coordinates
/// `a = u'(0)`, `b = u(0)`, `c = (-x + <a, b>) / 2`.
pub fn heis_bridge<T: Real>(g: &GroupElement<T>) -> Result<HeisElement<T>> {
    if g.k != 0 {
        return Err(Error::NotInSigmaForm);
    }
    let a = g.u.w0.clone();
    let b = g.u.u0.clone();
    let c = (-g.x + a.dot(&b)) * T::lit(0.5);
    Ok(HeisElement { a, b, c })
}

/// Relative tolerance for `[A, F] = 0`.
pub const COMMUTING_TOL: f64 = 1e-10;

/// Automorphism induced by the rotation `exp(F)`:
/// `(a, b, c) -> (exp(F) a, exp(F) b, c)`.
pub fn pi_automorphism<T: Real>(model: &ModelSpec<T>, f: &DMatrix<T>, h: &HeisElement<T>) -> Result<HeisElement<T>> {
    let a = model.a();
    let comm = (a * f - f * a).amax();
    if comm > T::lit(COMMUTING_TOL) * a.amax().max(T::one()) * f.amax().max(T::one()) {
        return Err(Error::NonCommutingF(comm.as_f64()));
    }
    let r = crate::killing::rotation_flow(f, T::one())?;
    Ok(HeisElement { a: &r * &h.a, b: &r * &h.b, c: h.c })
}

/// Lattice data `(r_j, w_j)`, each standing for the element `(0, r_j, w_j)`.
#[derive(Debug, Clone)]
pub struct SigmaLattice<T: Real> {
    pub generators: Vec<(T, HillSolution<T>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaReport {
    /// Pairwise `Omega` vanishes and the generators commute.
    pub abelian_ok: bool,
    pub rank: usize,
    /// Every `w_j` satisfies `w_j'(0) = B(0) w_j(0)`.
    pub in_l_ok: bool,
    /// `rank = n - 1`.
    pub full_rank: bool,
    pub max_omega: f64,
    pub max_commutator: f64,
    pub max_membership_residual: f64,
}

/// Checks lattice generators against the subspace defined by `b0`.
pub fn sigma_validate<T: Real>(lattice: &SigmaLattice<T>, b0: &DMatrix<T>) -> Result<SigmaReport> {
    let gens = &lattice.generators;
    if gens.is_empty() {
        return Err(Error::RankDeficient { rank: 0, generators: 0 });
    }
    let model = gens[0].1.model().clone();
    for (_, w) in gens {
        same_model(&model, w.model())?;
    }
    let m = model.fiber_dim();
    if b0.nrows() != m || b0.ncols() != m {
        return Err(Error::DimensionMismatch { expected: m, found: b0.nrows() });
    }
    let data = DMatrix::from_fn(1 + 2 * m, gens.len(), |row, col| {
        let (r, w) = &gens[col];
        match row {
            0 => *r,
            i if i <= m => w.u0[i - 1],
            i => w.w0[i - 1 - m],
        }
    });
    let scale = data.amax().max(T::one());
    let rank = data.svd(false, false).rank(T::lit(1e-9) * scale);
    if rank < gens.len() {
        return Err(Error::RankDeficient { rank, generators: gens.len() });
    }

    let elems: Vec<_> = gens.iter().map(|(r, w)| GroupElement::new(0, *r, w.clone())).collect();
    let (mut max_omega, mut max_comm) = (T::zero(), T::zero());
    for i in 0..elems.len() {
        for j in (i + 1)..elems.len() {
            max_omega = max_omega.max(omega_initial(&elems[i].u, &elems[j].u)?.abs());
            let ab = g_compose(&elems[i], &elems[j])?;
            let ba = g_compose(&elems[j], &elems[i])?;
            max_comm = max_comm.max(ab.distance(&ba));
        }
    }
    let membership = gens
        .iter()
        .fold(T::zero(), |acc, (_, w)| acc.max((&w.w0 - b0 * &w.u0).amax()));
    Ok(SigmaReport {
        abelian_ok: max_omega <= T::lit(1e-8) && max_comm <= T::lit(1e-9),
        rank,
        in_l_ok: membership <= T::lit(1e-8),
        full_rank: rank == model.n() - 1,
        max_omega: max_omega.as_f64(),
        max_commutator: max_comm.as_f64(),
        max_membership_residual: membership.as_f64(),
    })
}
