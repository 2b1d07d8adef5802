//! Riemann, Ricci and Weyl tensors of the model metric, their covariant
//! derivatives, and the null-line wedge test.
//!
//! Index conventions: `R^a_{bcd} = d_c G^a_{db} - d_d G^a_{cb} + G^a_{ce} G^e_{db} - G^a_{de} G^e_{cb}`
//! and `R_{abcd} = g_{ae} R^e_{bcd}`, so that `R_{titj} = -(f(t) I + A)_{ij}`.

use nalgebra::DMatrix;

use crate::model::{ModelSpec, Point, Tangent, T_IDX};
use crate::scalar::Real;

/// Dense rank-4 array indexed `[a][b][c][d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor4<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.n + b) * self.n + c) * self.n + d
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> T {
        self.data[self.idx(a, b, c, d)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: T) {
        let i = self.idx(a, b, c, d);
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// Largest entrywise `|self - other|`.
    pub fn max_diff(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (x, y)| m.max((*x - *y).abs()))
    }

    fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut t = Self::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        t.set(a, b, c, d, f(a, b, c, d));
                    }
                }
            }
        }
        t
    }
}

/// Curvature tensors at one point.
#[derive(Debug, Clone)]
pub struct CurvatureBundle<T: Real> {
    pub point: Point<T>,
    /// `R_{abcd}`, all indices down.
    pub riemann: Tensor4<T>,
    pub ricci: DMatrix<T>,
    pub scalar: T,
    pub weyl: Tensor4<T>,
}

impl<T: Real> CurvatureBundle<T> {
    /// Largest violation of `R_{abcd} = -R_{bacd} = -R_{abdc} = R_{cdab}`.
    pub fn symmetry_residual(&self) -> T {
        let r = &self.riemann;
        let n = r.dim();
        let mut m = T::zero();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let x = r.get(a, b, c, d);
                        m = m.max((x + r.get(b, a, c, d)).abs());
                        m = m.max((x + r.get(a, b, d, c)).abs());
                        m = m.max((x - r.get(c, d, a, b)).abs());
                    }
                }
            }
        }
        m
    }

    /// Largest `|R_{abcd} + R_{acdb} + R_{adbc}|`.
    pub fn bianchi_residual(&self) -> T {
        let r = &self.riemann;
        let n = r.dim();
        let mut m = T::zero();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        m = m.max((r.get(a, b, c, d) + r.get(a, c, d, b) + r.get(a, d, b, c)).abs());
                    }
                }
            }
        }
        m
    }

    /// Largest single trace `g^{ac} W_{abcd}` (and the other index pairs,
    /// which follow from the symmetries but are checked independently).
    pub fn weyl_trace_residual(&self, model: &ModelSpec<T>) -> T {
        let gi = model.inverse_metric(&self.point);
        let w = &self.weyl;
        let n = w.dim();
        let mut m = T::zero();
        for x in 0..n {
            for y in 0..n {
                let (mut t1, mut t2, mut t3) = (T::zero(), T::zero(), T::zero());
                for a in 0..n {
                    for c in 0..n {
                        let g = gi[(a, c)];
                        if g == T::zero() {
                            continue;
                        }
                        t1 += g * w.get(a, x, c, y);
                        t2 += g * w.get(a, c, x, y);
                        t3 += g * w.get(x, a, y, c);
                    }
                }
                m = m.max(t1.abs()).max(t2.abs()).max(t3.abs());
            }
        }
        m
    }
}

type Dense3<T> = Vec<T>;

#[inline]
fn i3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

/// `R^a_{bcd}` from Christoffels and their first derivatives `dgam[c]`.
fn riemann_up<T: Real>(n: usize, gam: &Dense3<T>, dgam: &[Dense3<T>]) -> Tensor4<T> {
    Tensor4::from_fn(n, |a, b, c, d| {
        let mut v = dgam[c][i3(n, a, d, b)] - dgam[d][i3(n, a, c, b)];
        for e in 0..n {
            v += gam[i3(n, a, c, e)] * gam[i3(n, e, d, b)] - gam[i3(n, a, d, e)] * gam[i3(n, e, c, b)];
        }
        v
    })
}

/// `d_e R^a_{bcd}` given `d_e Gamma` and `d_e d_c Gamma` for every `c`.
fn riemann_up_derivative<T: Real>(
    n: usize,
    gam: &Dense3<T>,
    dgam_e: &Dense3<T>,
    ddgam_e: &[Dense3<T>],
) -> Tensor4<T> {
    Tensor4::from_fn(n, |a, b, c, d| {
        let mut v = ddgam_e[c][i3(n, a, d, b)] - ddgam_e[d][i3(n, a, c, b)];
        for e in 0..n {
            v += dgam_e[i3(n, a, c, e)] * gam[i3(n, e, d, b)] + gam[i3(n, a, c, e)] * dgam_e[i3(n, e, d, b)]
                - dgam_e[i3(n, a, d, e)] * gam[i3(n, e, c, b)]
                - gam[i3(n, a, d, e)] * dgam_e[i3(n, e, c, b)];
        }
        v
    })
}

fn lower_first<T: Real>(g: &DMatrix<T>, up: &Tensor4<T>) -> Tensor4<T> {
    let n = up.dim();
    Tensor4::from_fn(n, |a, b, c, d| {
        let mut v = T::zero();
        for e in 0..n {
            let gae = g[(a, e)];
            if gae != T::zero() {
                v += gae * up.get(e, b, c, d);
            }
        }
        v
    })
}

/// Weyl tensor from the conformal decomposition in dimension `n`.
fn weyl_from<T: Real>(g: &DMatrix<T>, riem: &Tensor4<T>, ric: &DMatrix<T>, scal: T) -> Tensor4<T> {
    let n = riem.dim();
    let nn = T::from_usize(n).unwrap();
    let c1 = T::one() / (nn - T::lit(2.0));
    let c2 = scal / ((nn - T::one()) * (nn - T::lit(2.0)));
    Tensor4::from_fn(n, |a, b, c, d| {
        riem.get(a, b, c, d)
            - c1 * (ric[(a, c)] * g[(b, d)] - ric[(a, d)] * g[(b, c)] + ric[(b, d)] * g[(a, c)] - ric[(b, c)] * g[(a, d)])
            + c2 * (g[(a, c)] * g[(b, d)] - g[(a, d)] * g[(b, c)])
    })
}

fn ricci_of<T: Real>(gi: &DMatrix<T>, riem: &Tensor4<T>) -> DMatrix<T> {
    let n = riem.dim();
    DMatrix::from_fn(n, n, |b, d| {
        let mut v = T::zero();
        for a in 0..n {
            for c in 0..n {
                let g = gi[(a, c)];
                if g != T::zero() {
                    v += g * riem.get(a, b, c, d);
                }
            }
        }
        v
    })
}

/// All curvature tensors at `point`, from the analytic Christoffel jets.
pub fn curvature_at<T: Real>(model: &ModelSpec<T>, point: &Point<T>) -> CurvatureBundle<T> {
    let n = model.n();
    let gam = model.christoffel_at(point).to_dense();
    let dgam: Vec<_> = (0..n).map(|c| model.christoffel_derivative(point, c).to_dense()).collect();
    let g = model.metric_matrix(point);
    let gi = model.inverse_metric(point);
    let riemann = lower_first(&g, &riemann_up(n, &gam, &dgam));
    let ricci = ricci_of(&gi, &riemann);
    let scalar = (&gi * &ricci).trace();
    let weyl = weyl_from(&g, &riemann, &ricci, scalar);
    CurvatureBundle { point: point.clone(), riemann, ricci, scalar, weyl }
}

/// `nabla_e T_{abcd} = d_e T_{abcd} - Gamma^f_{ea} T_{fbcd} - ... ` given the
/// partial derivatives `partial[e]`.
fn covariant_correction<T: Real>(
    n: usize,
    gam: &Dense3<T>,
    tensor: &Tensor4<T>,
    partial: &[Tensor4<T>],
) -> Vec<Tensor4<T>> {
    (0..n)
        .map(|e| {
            Tensor4::from_fn(n, |a, b, c, d| {
                let mut v = partial[e].get(a, b, c, d);
                for f in 0..n {
                    v -= gam[i3(n, f, e, a)] * tensor.get(f, b, c, d)
                        + gam[i3(n, f, e, b)] * tensor.get(a, f, c, d)
                        + gam[i3(n, f, e, c)] * tensor.get(a, b, f, d)
                        + gam[i3(n, f, e, d)] * tensor.get(a, b, c, f);
                }
                v
            })
        })
        .collect()
}

/// `nabla R` at `point` computed entirely from exact derivatives of kappa.
/// Entry `e` of the result is `nabla_e R_{abcd}`.
pub fn riemann_derivative_analytic<T: Real>(model: &ModelSpec<T>, point: &Point<T>) -> Vec<Tensor4<T>> {
    let n = model.n();
    let gam = model.christoffel_at(point).to_dense();
    let dgam: Vec<_> = (0..n).map(|c| model.christoffel_derivative(point, c).to_dense()).collect();
    let g = model.metric_matrix(point);
    let up = riemann_up(n, &gam, &dgam);
    let riem = lower_first(&g, &up);
    let grad = model.grad_kappa(point);
    let partial: Vec<_> = (0..n)
        .map(|e| {
            let ddgam: Vec<_> = (0..n).map(|c| model.christoffel_second_derivative(point, e, c).to_dense()).collect();
            let dup = riemann_up_derivative(n, &gam, &dgam[e], &ddgam);
            let mut out = lower_first(&g, &dup);
            // Only g_tt = kappa varies.
            let dk = if e == T_IDX {
                model.fourier().derivative(point.t, 1) * point.v.norm_squared()
            } else if e >= crate::model::X0 {
                grad[e - crate::model::X0]
            } else {
                T::zero()
            };
            if dk != T::zero() {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            let v = out.get(T_IDX, b, c, d) + dk * up.get(T_IDX, b, c, d);
                            out.set(T_IDX, b, c, d, v);
                        }
                    }
                }
            }
            out
        })
        .collect();
    covariant_correction(n, &gam, &riem, &partial)
}

/// Covariant derivative of a tensor field by central differences of its
/// components plus analytic Christoffel corrections.
fn covariant_fd<T: Real>(
    model: &ModelSpec<T>,
    point: &Point<T>,
    step: T,
    field: impl Fn(&CurvatureBundle<T>) -> Tensor4<T>,
) -> Vec<Tensor4<T>> {
    let n = model.n();
    let here = field(&curvature_at(model, point));
    let two_h = step + step;
    let partial: Vec<_> = (0..n)
        .map(|e| {
            let plus = field(&curvature_at(model, &point.shifted(e, step)));
            let minus = field(&curvature_at(model, &point.shifted(e, -step)));
            Tensor4::from_fn(n, |a, b, c, d| (plus.get(a, b, c, d) - minus.get(a, b, c, d)) / two_h)
        })
        .collect();
    covariant_correction(n, &model.christoffel_at(point).to_dense(), &here, &partial)
}

/// `nabla R` by finite differences (see [`parallelism_residuals`]).
pub fn riemann_derivative_fd<T: Real>(model: &ModelSpec<T>, point: &Point<T>, step: T) -> Vec<Tensor4<T>> {
    covariant_fd(model, point, step, |b| b.riemann.clone())
}

/// `nabla W` by finite differences.
pub fn weyl_derivative_fd<T: Real>(model: &ModelSpec<T>, point: &Point<T>, step: T) -> Vec<Tensor4<T>> {
    covariant_fd(model, point, step, |b| b.weyl.clone())
}

fn max_over<T: Real>(ts: &[Tensor4<T>]) -> T {
    ts.iter().fold(T::zero(), |m, t| m.max(t.max_abs()))
}

/// Largest component of `nabla W` and of `nabla R` over the samples, using
/// central differences with the given step.
pub fn parallelism_residuals<T: Real>(model: &ModelSpec<T>, samples: &[Point<T>], step: T) -> (T, T) {
    samples.iter().fold((T::zero(), T::zero()), |(w, r), p| {
        (w.max(max_over(&weyl_derivative_fd(model, p, step))), r.max(max_over(&riemann_derivative_fd(model, p, step))))
    })
}

/// Tolerance of [`olszak_check`].
pub const OLSZAK_TOL: f64 = 1e-8;

/// Largest component of `g(u, .) ^ W(d_a, d_b, ., .)` over all `a < b` and
/// all index triples.
pub fn olszak_residual<T: Real>(model: &ModelSpec<T>, bundle: &CurvatureBundle<T>, u: &Tangent<T>) -> T {
    let n = model.n();
    let g = model.metric_matrix(&bundle.point);
    let alpha = &g * u.components();
    let w = &bundle.weyl;
    let mut worst = T::zero();
    for a in 0..n {
        for b in (a + 1)..n {
            for x in 0..n {
                for y in (x + 1)..n {
                    for z in (y + 1)..n {
                        let v = alpha[x] * w.get(a, b, y, z) - alpha[y] * w.get(a, b, x, z) + alpha[z] * w.get(a, b, x, y);
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
    }
    worst
}

/// True iff `u` lies in the null line singled out by the Weyl tensor at its
/// base point, i.e. the wedge residual is below [`OLSZAK_TOL`].
pub fn olszak_check<T: Real>(model: &ModelSpec<T>, point: &Point<T>, u: &Tangent<T>) -> bool {
    let bundle = curvature_at(model, point);
    olszak_residual(model, &bundle, u) < T::lit(OLSZAK_TOL)
}
