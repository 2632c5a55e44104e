//! Numerical calculus of slice-regular quaternionic functions on the unit
//! ball of the quaternions.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod norms;
pub mod operators;
pub mod quadrature;
pub mod quaternion;
pub mod series;
pub mod verify;

pub use error::{Error, Result};
pub use quaternion::{ImaginaryUnit, Quaternion, SliceCoordinates};
pub use series::{Mobius, PowerSeries, SliceFunction};
