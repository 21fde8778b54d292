//! Special functions, small dense eigenproblems, matrix exponentials and
//! quadrature shared by the rest of the crate.

mod dawson;
mod eigen;
mod expm;
mod quadrature;

pub use dawson::dawson;
pub use eigen::{eigen_decompose, eigenvalues, spectral_radius, EigenSystem, MAX_CONDITION};
pub use expm::{expm, expm_apply};
pub use quadrature::{
    gauss_hermite, integrate_adaptive, integrate_semi_infinite, lorentz_mapped, QuadratureKind,
    QuadratureRule, MAX_ORDER,
};
