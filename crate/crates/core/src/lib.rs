//! Coherent population trapping line shapes for Λ atoms in a wall-coated
//! cylindrical cell lit by a coaxial beam, with partially elastic wall
//! collisions.
//!
//! The analytic stack is generic over [`scalar::Real`]; the aliases below fix
//! it to `f64` (or `f32`) for everyday use.

pub mod averaging;
pub mod bloch;
pub mod distributions;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod numerics;
pub mod scalar;

pub use error::{Error, Result};

pub type Params = bloch::PhysicalParams<f64>;
pub type Params32 = bloch::PhysicalParams<f32>;
pub type Bloch = bloch::BlochVector<f64>;
pub type Spectrum = averaging::Spectrum<f64>;
pub type Geometry = distributions::GeometryDerived<f64>;
