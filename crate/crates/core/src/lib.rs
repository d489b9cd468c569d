//! Helmholtz layer operators on two-dimensional boundaries and their
//! wavenumber-explicit operator norms.

// `!(x > 0)` is how NaN gets refused; tabulated constants keep every printed digit.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod assembly;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod norms;
pub mod quadrature;
pub mod scalar;
pub mod specfun;
pub mod sweep;

pub use error::{Error, Result};
pub use scalar::{Real, C};

// Double-precision shorthands.
pub type Complex = C<f64>;
pub type Geometry = geometry::BoundaryGeometry<f64>;
pub type Piece = geometry::BoundaryPiece<f64>;
pub type Disc = assembly::Discretization<f64>;
pub type Operator = assembly::DenseOperator<f64>;
pub type Spec = norms::NormSpec<f64>;
pub type Report = norms::NormReport<f64>;
pub type ExponentFit = fit::Fit<f64>;
