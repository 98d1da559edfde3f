//! Holomorphic Legendrian curves on planar circular domains.
//!
//! Everything lives in the function class of Laurent polynomials with poles
//! restricted to the declared hole centers of a circular domain. On that
//! class the contact machinery is exact: one-forms differentiate and
//! integrate symbolically, periods reduce to residues, and the Legendrian
//! condition dz + Σ x_i dy_i = 0 is a statement about coefficients that can
//! be checked to rounding level.

pub mod approx;
pub mod contact;
pub mod demos;
pub mod embed;
pub mod geometry;
pub mod laurent;
pub mod linalg;
pub mod pipeline;
pub mod quad;
pub mod report;
pub mod spray;

pub use num_complex::Complex64 as C64;

/// Max-norm of a point in C^{2n+1}: the largest component modulus.
pub fn max_norm(components: &[C64]) -> f64 {
    components.iter().map(|c| c.norm()).fold(0.0, f64::max)
}
