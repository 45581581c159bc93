//! Mixed finite elements for the stationary Stokes equations on rectangular
//! tensor-product grids.
//!
//! Two velocity/pressure pairs share the velocity space
//! `Q(k+1,k) x Q(k,k+1)`:
//!
//! * the divergence-free element, whose pressure space is `div V_h` and is
//!   never built; it is solved with the iterated penalty method and the
//!   pressure falls out of the divergence accumulator;
//! * the rotated Bernardi-Raugel element with discontinuous `Q(k-1)`
//!   pressure, solved by a mass-scaled Uzawa iteration.
//!
//! The [`study`] module drives convergence studies against manufactured
//! polynomial solutions and the dual-norm decay checks of the moment
//! interpolant.

pub mod assembly;
pub mod error;
pub mod fespace;
pub mod interpolation;
pub mod mesh;
pub mod norms;
pub mod poly2d;
pub mod quadrature;
pub mod solvers;
pub mod study;

pub use error::{Error, Result};
