//! Numerical laboratory for pp-wave spacetimes
//! `(R^2 x V, kappa dt^2 + dt ds + <dv, dv>)` with
//! `kappa = f(t) |v|^2 + <A v, v>`, `f` periodic and `A` symmetric traceless.
//!
//! Every routine is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`, which is what the verification tolerances assume.
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use ppwave::{build_model, FourierSeries, Mode, Point};
//!
//! let f = FourierSeries::<f64>::new(1.0, 0.0, vec![(1.0, 0.0)]).unwrap();
//! let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -2.0]));
//! let model = build_model(5, f, a, Mode::Strict).unwrap();
//! let p = Point::new(0.0, 0.0, DVector::from_vec(vec![1.0, 0.0, 0.0]));
//! assert!((model.kappa(&p) - 2.0).abs() < 1e-12);
//! ```

pub mod curvature;
pub mod error;
pub mod geodesic;
pub mod group;
pub mod hill;
pub mod holonomy;
pub mod killing;
pub mod model;
pub mod ode;
pub mod scalar;

pub use curvature::{curvature_at, olszak_check, parallelism_residuals, CurvatureBundle, Tensor4};
pub use error::{Error, Result};
pub use geodesic::{completeness_probe, geodesic_integrate, reduced_system, CompletenessReport, GeodesicPath};
pub use group::{
    g_act, g_act_differential, g_compose, g_identity, g_inverse, heis_bridge, heis_mul, isometry_residual,
    pi_automorphism, sigma_validate, GroupElement, HeisElement, SigmaLattice, SigmaReport,
};
pub use hill::{
    canonical_basis, fundamental_pair, lagrangian_subspace, monodromy, omega, riccati_solve, shift, FundamentalPair,
    HillSolution, RiccatiField,
};
pub use holonomy::{
    closed_form_transport, generator_curve, holonomy_sampler, parallel_transport, quotient_transport, CurveSpec,
    SignConvention, TransportMatrix,
};
pub use killing::{
    centralizer_basis, commutator_check, isom0_dimension, killing_eval, killing_residual, rotation_flow,
    KillingField, SkewBasis,
};
pub use model::config::{ConfigError, ModelConfig};
pub use model::{build_model, FourierSeries, KappaPartial, Mode, ModelSpec, Point, Tangent};
pub use scalar::Real;

/// `f64` instantiations.
pub type Model = ModelSpec<f64>;
pub type Point64 = Point<f64>;
pub type Tangent64 = Tangent<f64>;
pub type Solution = HillSolution<f64>;
pub type Element = GroupElement<f64>;
pub type Transport = TransportMatrix<f64>;
pub type Riccati = RiccatiField<f64>;
/// `f32` model, for callers that trade accuracy for memory.
pub type Model32 = ModelSpec<f32>;
