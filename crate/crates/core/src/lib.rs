//! Numerical laboratory for nodal bubble towers of the slightly subcritical
//! elliptic problem with a Hardy potential on the unit ball,
//!
//! ```text
//! -Δu - μu/|x|² = |u|^{2*-2-ε} u  in B,   u = 0 on ∂B,   μ = μ₀ε,
//! ```
//!
//! in dimension N ≥ 7. The crate evaluates the closed-form profiles, their
//! moments and projections, the reduced energy and its critical points, and
//! builds radial towers whose residuals and rates can be measured.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod energy;
pub mod error;
pub mod fit;
pub mod profiles;
pub mod projection;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod tower;

pub use error::{Error, Result};
