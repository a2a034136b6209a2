//! Shape stability of balls for Robin heat-convection energies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ball_analysis;
pub mod disk_spectral;
pub mod error;
pub mod fem2d;
pub mod flows;
pub mod linalg;
pub mod quadrature;
pub mod rearrange;
pub mod scalar;
pub mod sources;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

/// Exact rational scalar for closed-form ball quantities.
pub type Rational = num_rational::Ratio<i64>;

pub type Ball = ball_analysis::BallProblem<f64>;
pub type Source = sources::RadialSource<f64>;
pub type Bc = ball_analysis::BoundaryCondition<f64>;
pub type Domain = fem2d::StarDomain<f64>;
pub type Grid = rearrange::GridField<f64>;
pub type Field = disk_spectral::FourierRadialField<f64>;
pub type Flow = flows::PerturbationSpec<f64>;
